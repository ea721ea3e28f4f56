#pragma once

// Numerical semiflow: time integration, trajectory recording, finite-horizon
// invariance checks and the order-preservation checker.

#include "monolab/model.hpp"
#include "monolab/order.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace monolab {

enum class Scheme { AdaptiveRK54, ImexCnHeun };

inline const char* scheme_name(Scheme s) {
  return s == Scheme::AdaptiveRK54 ? "rk54" : "imex_cn_heun";
}

struct IntegratorConfig {
  Scheme scheme = Scheme::AdaptiveRK54;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double dt = 0.01;  // IMEX step
  std::size_t max_step_count = 2'000'000;
  double blowup_threshold = 1e8;

  void validate() const {
    require(rel_tol > 0.0 && abs_tol > 0.0, "IntegratorConfig: tolerances must be positive");
    require(scheme != Scheme::ImexCnHeun || dt > 0.0, "IntegratorConfig: dt must be positive");
    require(max_step_count > 0, "IntegratorConfig: max_step_count must be positive");
  }
};

/// Adaptive RK for networks, IMEX for reaction-diffusion models.
inline IntegratorConfig default_integrator(const Model& model, double imex_dt = 0.01) {
  IntegratorConfig cfg;
  if (model.kind() == ModelKind::ReactionDiffusion) {
    cfg.scheme = Scheme::ImexCnHeun;
    cfg.dt = imex_dt;
  }
  return cfg;
}

enum class TerminalFlag { ReachedHorizon, StepLimitExceeded, Blowup };

inline const char* terminal_flag_name(TerminalFlag f) {
  switch (f) {
    case TerminalFlag::ReachedHorizon: return "reached_horizon";
    case TerminalFlag::StepLimitExceeded: return "step_limit_exceeded";
    case TerminalFlag::Blowup: return "blowup";
  }
  return "?";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVec> states;
  TerminalFlag terminal_flag = TerminalFlag::ReachedHorizon;

  const StateVec& final_state() const { return states.back(); }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  // 5th minus embedded 4th order weights.
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline bool diverged(const Eigen::VectorXd& u, double threshold) {
  return !u.allFinite() || (u.size() > 0 && u.lpNorm<Eigen::Infinity>() > threshold);
}

// Next time to land on exactly: the first stop time after t, or t_end.
inline double next_target(double t, double t_end, std::span<const double> stops, std::size_t& cursor) {
  while (cursor < stops.size() && stops[cursor] <= t) ++cursor;
  if (cursor < stops.size() && stops[cursor] < t_end) return stops[cursor];
  return t_end;
}

// Right-hand side that converts evaluation failures into non-finite output.
inline bool safe_rhs(const Model& model, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
  try {
    model.rhs(u, out);
  } catch (const EvaluationError&) {
    return false;
  }
  return out.allFinite();
}

template <class Observer>
TerminalFlag integrate_rk54(const Model& model, Eigen::VectorXd& u, double t_end,
                            const IntegratorConfig& cfg, std::span<const double> stops,
                            Observer& observe) {
  using D = Dopri;
  const Eigen::Index n = u.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), next(n), err(n);
  double t = 0.0;
  if (!safe_rhs(model, u, k1)) return TerminalFlag::Blowup;

  auto scaled_norm = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (n == 0) return 0.0;
    const Eigen::ArrayXd sk = cfg.abs_tol + cfg.rel_tol * a.array().abs().max(b.array().abs());
    return std::sqrt((e.array() / sk).square().mean());
  };

  // Initial step (Hairer, Norsett & Wanner, II.4).
  double h_prop;
  {
    const double d0 = scaled_norm(u, u, u);
    const double d1 = scaled_norm(k1, u, u);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::max(t_end, 1e-12));
    tmp = u + h0 * k1;
    if (!safe_rhs(model, tmp, k2)) {
      h_prop = h0 * 1e-3;
    } else {
      const double d2 = scaled_norm(k2 - k1, u, u) / h0;
      const double dm = std::max(d1, d2);
      const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
      h_prop = std::min(100.0 * h0, h1);
    }
  }

  constexpr double kSafety = 0.9, kBeta = 0.04, kExpo = 0.2 - kBeta * 0.75;
  constexpr double kMinFactor = 0.2, kMaxFactor = 10.0;
  double err_old = 1e-4;
  std::size_t steps = 0;
  std::size_t cursor = 0;

  while (t < t_end) {
    if (++steps > cfg.max_step_count) return TerminalFlag::StepLimitExceeded;
    const double target = next_target(t, t_end, stops, cursor);
    bool lands = false;
    double h = h_prop;
    if (t + h >= target || target - (t + h) < 1e-12 * std::max(1.0, std::abs(target))) {
      h = target - t;
      lands = true;
    }

    bool ok = true;
    tmp = u + h * D::a21 * k1;
    ok = ok && safe_rhs(model, tmp, k2);
    if (ok) { tmp = u + h * (D::a31 * k1 + D::a32 * k2); ok = safe_rhs(model, tmp, k3); }
    if (ok) { tmp = u + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3); ok = safe_rhs(model, tmp, k4); }
    if (ok) {
      tmp = u + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4);
      ok = safe_rhs(model, tmp, k5);
    }
    if (ok) {
      tmp = u + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5);
      ok = safe_rhs(model, tmp, k6);
    }
    if (ok) {
      next = u + h * (D::a71 * k1 + D::a73 * k3 + D::a74 * k4 + D::a75 * k5 + D::a76 * k6);
      ok = safe_rhs(model, next, k7);
    }
    if (!ok) {
      h_prop = h * 0.25;
      if (h_prop < 1e-14 * std::max(1.0, std::abs(t))) {
        observe(t, Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity()), -1);
        return TerminalFlag::Blowup;
      }
      continue;
    }

    err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);
    const double e = scaled_norm(err, u, next);

    if (e <= 1.0) {
      const double fac11 = std::pow(std::max(e, 1e-300), kExpo);
      double fac = fac11 / std::pow(err_old, kBeta);
      fac = std::clamp(fac / kSafety, 1.0 / kMaxFactor, 1.0 / kMinFactor);
      err_old = std::max(e, 1e-4);
      t = lands ? target : t + h;
      u.swap(next);
      k1.swap(k7);
      const int stop_index =
          (lands && cursor < stops.size() && stops[cursor] == t) ? static_cast<int>(cursor) : -1;
      if (diverged(u, cfg.blowup_threshold)) {
        observe(t, u, stop_index);
        return TerminalFlag::Blowup;
      }
      observe(t, u, stop_index);
      // A landing step may be artificially short; do not let it shrink the proposal.
      const double h_new = h / fac;
      h_prop = lands ? std::max(h_prop, h_new) : h_new;
    } else {
      const double fac11 = std::pow(e, kExpo);
      h_prop = h / std::min(1.0 / kMinFactor, fac11 / kSafety);
    }
  }
  return TerminalFlag::ReachedHorizon;
}

class ImplicitDiffusion {
 public:
  explicit ImplicitDiffusion(SparseMatrix a) : a_(std::move(a)) {}

  bool empty() const { return a_.rows() == 0 || a_.nonZeros() == 0; }
  const SparseMatrix& matrix() const { return a_; }

  /// Solves (I - h/2 A) x = b.
  void solve(double h, const Eigen::VectorXd& b, Eigen::VectorXd& x) {
    if (empty()) {
      x = b;
      return;
    }
    x = factor(h).solve(b);
  }

 private:
  Eigen::SparseLU<SparseMatrix>& factor(double h) {
    for (auto& [key, lu] : cache_) {
      if (key == h) return *lu;
    }
    SparseMatrix m(a_.rows(), a_.cols());
    m.setIdentity();
    m = m - (0.5 * h) * a_;
    m.makeCompressed();
    auto lu = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
    lu->compute(m);
    require(lu->info() == Eigen::Success, "IMEX: diffusion factorization failed");
    if (cache_.size() >= 4) cache_.erase(cache_.begin() + 1);
    cache_.emplace_back(h, std::move(lu));
    return *cache_.back().second;
  }

  SparseMatrix a_;
  std::vector<std::pair<double, std::unique_ptr<Eigen::SparseLU<SparseMatrix>>>> cache_;
};

// Crank-Nicolson on the linear part, Heun (explicit trapezoid) on the rest:
//   (I - h/2 A) p   = (I + h/2 A) u + h N(u)
//   (I - h/2 A) u'  = (I + h/2 A) u + h/2 (N(u) + N(p))
// Equilibria of F are fixed points of the step.
template <class Observer>
TerminalFlag integrate_imex(const Model& model, Eigen::VectorXd& u, double t_end,
                            const IntegratorConfig& cfg, std::span<const double> stops,
                            Observer& observe) {
  ImplicitDiffusion diffusion(model.linear_part());
  const Eigen::Index n = u.size();
  Eigen::VectorXd r0(n), r1(n), base(n), pred(n);
  auto nonlinear = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    try {
      model.nonlinear(x, out);
    } catch (const EvaluationError&) {
      return false;
    }
    return out.allFinite();
  };

  double t = 0.0;
  std::size_t steps = 0;
  std::size_t cursor = 0;
  const double dt = cfg.dt;
  while (t < t_end) {
    const double target = next_target(t, t_end, stops, cursor);
    const double remaining = target - t;
    double h = dt;
    bool lands = false;
    if (remaining <= dt * (1.0 + 1e-9)) {
      h = remaining;
      lands = true;
    }
    if (h <= 1e-12 * dt) {  // rounding leftover
      t = target;
      const int stop_index = (cursor < stops.size() && stops[cursor] == t) ? static_cast<int>(cursor) : -1;
      if (stop_index >= 0) observe(t, u, stop_index);
      continue;
    }
    if (++steps > cfg.max_step_count) return TerminalFlag::StepLimitExceeded;

    bool ok = nonlinear(u, r0);
    if (ok) {
      base = u;
      if (!diffusion.empty()) base.noalias() += (0.5 * h) * (diffusion.matrix() * u);
      diffusion.solve(h, base + h * r0, pred);
      ok = nonlinear(pred, r1);
    }
    if (!ok) {
      observe(t, Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity()), -1);
      return TerminalFlag::Blowup;
    }
    diffusion.solve(h, base + (0.5 * h) * (r0 + r1), u);
    t = lands ? target : t + h;
    const int stop_index =
        (lands && cursor < stops.size() && stops[cursor] == t) ? static_cast<int>(cursor) : -1;
    observe(t, u, stop_index);
    if (diverged(u, cfg.blowup_threshold)) return TerminalFlag::Blowup;
  }
  return TerminalFlag::ReachedHorizon;
}

}  // namespace detail

/// Integrates from `u` (updated in place) over [0, t_end], landing exactly on
/// every time in `stop_times` (ascending). `observe(t, state, stop_index)` is
/// called at t = 0 and after every accepted step; stop_index is the position
/// in `stop_times` when the step lands on one, else -1.
template <class Observer>
TerminalFlag integrate(const Model& model, Eigen::VectorXd& u, double t_end,
                       const IntegratorConfig& cfg, std::span<const double> stop_times,
                       Observer&& observe) {
  cfg.validate();
  require(t_end >= 0.0, "integrate: t_end must be >= 0");
  require(static_cast<std::size_t>(u.size()) == model.dim(), "integrate: state does not match model");
  require(std::is_sorted(stop_times.begin(), stop_times.end()), "integrate: stop times must be ascending");
  int zero_stop = (!stop_times.empty() && stop_times.front() == 0.0) ? 0 : -1;
  observe(0.0, static_cast<const Eigen::VectorXd&>(u), zero_stop);
  if (detail::diverged(u, cfg.blowup_threshold)) return TerminalFlag::Blowup;
  if (t_end == 0.0) return TerminalFlag::ReachedHorizon;
  if (cfg.scheme == Scheme::AdaptiveRK54) {
    return detail::integrate_rk54(model, u, t_end, cfg, stop_times, observe);
  }
  return detail::integrate_imex(model, u, t_end, cfg, stop_times, observe);
}

/// Full trajectory: every accepted step is recorded.
inline Trajectory flow(const Model& model, const StateVec& x0, double t_end, const IntegratorConfig& cfg,
                       std::span<const double> stop_times = {}) {
  require(x0.layout() == model.layout(), "flow: initial datum does not match model layout");
  require(x0.all_finite(), "flow: initial datum must be finite");
  Trajectory traj;
  Eigen::VectorXd u = x0.values();
  const Layout layout = x0.layout();
  traj.terminal_flag = integrate(model, u, t_end, cfg, stop_times,
                                 [&](double t, const Eigen::VectorXd& x, int) {
                                   traj.times.push_back(t);
                                   traj.states.emplace_back(x, layout);
                                 });
  return traj;
}

/// Point evaluation of the semiflow; throws when the run does not reach `t`.
inline StateVec flow_at(const Model& model, const StateVec& x0, double t, const IntegratorConfig& cfg) {
  require(x0.layout() == model.layout(), "flow_at: initial datum does not match model layout");
  if (t == 0.0) return x0;
  Eigen::VectorXd u = x0.values();
  const TerminalFlag flag = integrate(model, u, t, cfg, {}, [](double, const Eigen::VectorXd&, int) {});
  if (flag != TerminalFlag::ReachedHorizon) {
    throw std::runtime_error(std::string("flow_at: integration ended with ") + terminal_flag_name(flag));
  }
  return StateVec(std::move(u), x0.layout());
}

struct StaysResult {
  bool holds = true;
  TerminalFlag flag = TerminalFlag::ReachedHorizon;
  double first_exit_time = std::numeric_limits<double>::quiet_NaN();

  explicit operator bool() const { return holds; }
};

/// Finite-horizon check that the predicate holds at every recorded state with
/// t in [r, horizon]. A necessary condition for membership in W(D, r) only.
inline StaysResult stays_in(const Model& model, const StateVec& x0,
                            const std::function<bool(const StateVec&)>& predicate, double r,
                            double horizon, const IntegratorConfig& cfg) {
  require(0.0 <= r && r <= horizon, "stays_in: need 0 <= r <= horizon");
  StaysResult result;
  Eigen::VectorXd u = x0.values();
  const double stops[] = {r};
  const Layout layout = x0.layout();
  result.flag = integrate(model, u, horizon, cfg, std::span<const double>(stops, 1),
                          [&](double t, const Eigen::VectorXd& x, int) {
                            if (t < r || !result.holds) return;
                            if (!x.allFinite() || !predicate(StateVec(x, layout))) {
                              result.holds = false;
                              result.first_exit_time = t;
                            }
                          });
  if (result.flag != TerminalFlag::ReachedHorizon) result.holds = false;
  return result;
}

struct MonotoneSample {
  double t;
  double margin;  // min sign-adjusted coordinate of Phi_t(y) - Phi_t(x)
};

struct MonotoneReport {
  std::vector<MonotoneSample> samples;
  std::vector<MonotoneSample> violations;
  bool completed = true;  // both runs reached every sample time

  bool ok() const { return completed && violations.empty(); }
};

namespace detail {

inline std::vector<StateVec> states_at(const Model& model, const StateVec& x0,
                                       std::span<const double> times, const IntegratorConfig& cfg,
                                       bool& completed) {
  std::vector<StateVec> out(times.size());
  std::vector<bool> seen(times.size(), false);
  Eigen::VectorXd u = x0.values();
  const double t_end = times.empty() ? 0.0 : times.back();
  const TerminalFlag flag = integrate(model, u, t_end, cfg, times, [&](double, const Eigen::VectorXd& x, int idx) {
    if (idx >= 0) {
      out[static_cast<std::size_t>(idx)] = StateVec(x, x0.layout());
      seen[static_cast<std::size_t>(idx)] = true;
    }
  });
  completed = flag == TerminalFlag::ReachedHorizon && std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  return out;
}

}  // namespace detail

/// Integrates from x <= y and compares the two orbits at each sample time.
inline MonotoneReport check_monotone(const Model& model, const StateVec& x, const StateVec& y,
                                     const ConeOrder& order, std::vector<double> t_samples,
                                     const IntegratorConfig& cfg, double tol_order = 1e-8) {
  require(cone_leq(x, y, order), "check_monotone: precondition x <= y violated");
  std::sort(t_samples.begin(), t_samples.end());
  MonotoneReport report;
  bool done_x = true, done_y = true;
  const auto fx = detail::states_at(model, x, t_samples, cfg, done_x);
  const auto fy = detail::states_at(model, y, t_samples, cfg, done_y);
  report.completed = done_x && done_y;
  if (!report.completed) return report;
  for (std::size_t i = 0; i < t_samples.size(); ++i) {
    const Eigen::VectorXd d = order.adjusted_difference(fx[i], fy[i]);
    const MonotoneSample s{t_samples[i], d.size() ? d.minCoeff() : 0.0};
    report.samples.push_back(s);
    if (s.margin < -tol_order) report.violations.push_back(s);
  }
  return report;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
  os << '\n';
  char buf[40];
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
    os << buf;
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", traj.states[k][i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace monolab
