#pragma once

// Reference values computed independently of the library.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

/// Root of g on [lo, hi] by bisection; g(lo) and g(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double glo = g(lo);
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Positive root of a = 2 tanh(a).
inline double tanh2_root() {
  return bisect([](double a) { return a - 2.0 * std::tanh(a); }, 1.0, 3.0);
}

/// Dominant real part s(J) of a real matrix by dense eigendecomposition.
inline double spectral_abscissa(const Eigen::MatrixXd& j) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(j, false);
  return es.eigenvalues().real().maxCoeff();
}

/// Random Metzler matrix with a positive cycle 0 -> 1 -> ... -> n-1 -> 0,
/// hence irreducible. Uses its own generator, not the library's.
inline Eigen::MatrixXd random_cooperative(int n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (r == c) {
        j(r, c) = -3.0 * unit(gen);
      } else if (unit(gen) < 0.5) {
        j(r, c) = unit(gen);
      }
    }
  }
  for (int r = 0; r < n && n > 1; ++r) j((r + 1) % n, r) = 0.5 + unit(gen);
  return j;
}

/// Shooting solution of d u'' + u - u^3 = 0 on [0, 1] with u'(0) = u'(1) = 0
/// and a single decreasing kink, sampled at `nodes` equispaced points.
/// Classical RK4 on (u, u'), bisection on u(0).
class KinkShooter {
 public:
  KinkShooter(double d, std::size_t nodes, std::size_t substeps = 50) : d_(d), nodes_(nodes), substeps_(substeps) {}

  // Position of the first return of u' to zero, from u(0) = alpha.
  double half_period(double alpha) const {
    const double h = step();
    double u = alpha, v = 0.0, x = 0.0;
    for (std::size_t k = 0; k < 400000; ++k) {
      const double v0 = v;
      advance(u, v, h);
      x += h;
      if (v0 < 0.0 && v >= 0.0) return x - h + h * (-v0) / (v - v0);
    }
    return std::numeric_limits<double>::infinity();
  }

  double amplitude() const {
    return bisect([this](double a) { return half_period(a) - 1.0; }, 0.05, 1.0 - 1e-12);
  }

  std::vector<double> profile() const {
    const double alpha = amplitude();
    std::vector<double> out{alpha};
    double u = alpha, v = 0.0;
    for (std::size_t j = 1; j < nodes_; ++j) {
      for (std::size_t s = 0; s < substeps_; ++s) advance(u, v, step());
      out.push_back(u);
    }
    return out;
  }

 private:
  double step() const { return 1.0 / static_cast<double>((nodes_ - 1) * substeps_); }

  void advance(double& u, double& v, double h) const {
    auto acc = [this](double w) { return -(w - w * w * w) / d_; };
    const double k1u = v, k1v = acc(u);
    const double k2u = v + 0.5 * h * k1v, k2v = acc(u + 0.5 * h * k1u);
    const double k3u = v + 0.5 * h * k2v, k3v = acc(u + 0.5 * h * k2u);
    const double k4u = v + h * k3v, k4v = acc(u + h * k3u);
    u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }

  double d_;
  std::size_t nodes_;
  std::size_t substeps_;
};

}  // namespace oracle
