#pragma once

// Equilibria of F(u) = 0 and their linear stability, measured by the spectral
// radius of the time-T linearized flow exp(T J(e)).

#include "monolab/model.hpp"
#include "monolab/order.hpp"
#include "monolab/random.hpp"
#include "monolab/rd.hpp"
#include "monolab/semiflow.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace monolab {

struct NewtonOptions {
  double tol = 1e-10;           // on ||F||_inf
  std::size_t max_iter = 50;
  std::size_t max_halvings = 30;
  std::size_t dense_limit = 64;  // dense LU up to this dimension
};

struct NewtonResult {
  bool success = false;
  StateVec state;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool singular = false;
};

namespace detail {

inline double residual_norm2(const Model& model, const Eigen::VectorXd& u, Eigen::VectorXd& f) {
  try {
    model.rhs(u, f);
  } catch (const EvaluationError&) {
    return std::numeric_limits<double>::infinity();
  }
  return f.allFinite() ? f.norm() : std::numeric_limits<double>::infinity();
}

// Solves J x = b; returns false when J is numerically singular.
inline bool linear_solve(const SparseMatrix& jac, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                         std::size_t dense_limit) {
  if (static_cast<std::size_t>(jac.rows()) <= dense_limit) {
    const Eigen::MatrixXd dense(jac);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
    if (!lu.isInvertible()) return false;
    x = lu.solve(b);
  } else {
    SparseMatrix a = jac;
    a.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) return false;
    x = lu.solve(b);
  }
  return x.allFinite();
}

}  // namespace detail

/// Damped Newton with Armijo backtracking on ||F||_2.
inline NewtonResult find_equilibrium(const Model& model, const StateVec& seed,
                                     const NewtonOptions& opts = {}) {
  require(seed.layout() == model.layout(), "find_equilibrium: seed does not match model layout");
  require(seed.all_finite(), "find_equilibrium: seed must be finite");
  NewtonResult result;
  Eigen::VectorXd u = seed.values();
  Eigen::VectorXd f(u.size()), f_trial(u.size()), step(u.size()), trial(u.size());
  double norm2 = detail::residual_norm2(model, u, f);
  auto finish = [&](bool success) {
    result.success = success;
    result.state = StateVec(u, seed.layout());
    result.residual = f.allFinite() ? f.lpNorm<Eigen::Infinity>() : std::numeric_limits<double>::infinity();
    return result;
  };
  if (!std::isfinite(norm2)) return finish(false);

  for (;;) {
    if (f.lpNorm<Eigen::Infinity>() <= opts.tol) return finish(true);
    if (result.iterations >= opts.max_iter) return finish(false);
    ++result.iterations;
    SparseMatrix jac;
    try {
      jac = model.jacobian(u);
    } catch (const EvaluationError&) {
      return finish(false);
    }
    if (!detail::linear_solve(jac, -f, step, opts.dense_limit)) {
      result.singular = true;
      return finish(false);
    }
    double alpha = 1.0;
    double trial_norm = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= opts.max_halvings; ++k) {
      trial = u + alpha * step;
      trial_norm = detail::residual_norm2(model, trial, f_trial);
      if (trial_norm <= (1.0 - 1e-4 * alpha) * norm2) break;
      if (k < opts.max_halvings) alpha *= 0.5;
    }
    if (!std::isfinite(trial_norm)) return finish(false);
    // Without sufficient decrease the smallest step is taken anyway.
    u.swap(trial);
    f.swap(f_trial);
    norm2 = trial_norm;
  }
}

/// u' = J u for a frozen Jacobian J.
class FrozenLinearization final : public Model {
 public:
  FrozenLinearization(SparseMatrix jac, Layout layout) : jac_(std::move(jac)), layout_(layout) {}

  Layout layout() const override { return layout_; }
  ModelKind kind() const override { return ModelKind::Network; }
  std::string description() const override { return "frozen linearization"; }
  using Model::rhs;
  void rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override { out.noalias() = jac_ * u; }
  SparseMatrix jacobian(const Eigen::VectorXd&) const override { return jac_; }

  const SparseMatrix& matrix() const { return jac_; }

 private:
  SparseMatrix jac_;
  Layout layout_;
};

/// Tolerances for the variational equation; RK54 is always used.
inline IntegratorConfig linearization_integrator() {
  IntegratorConfig cfg;
  cfg.scheme = Scheme::AdaptiveRK54;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  return cfg;
}

inline FrozenLinearization linearize(const Model& model, const StateVec& e) {
  require(e.layout() == model.layout(), "linearize: state does not match model layout");
  return FrozenLinearization(model.jacobian(e.values()), e.layout());
}

inline StateVec linearized_flow_apply(const FrozenLinearization& lin, const StateVec& w, double horizon,
                                      IntegratorConfig cfg = linearization_integrator()) {
  cfg.scheme = Scheme::AdaptiveRK54;
  Eigen::VectorXd v = w.values();
  if (horizon == 0.0 || v.isZero(0.0)) return w;
  const TerminalFlag flag = integrate(lin, v, horizon, cfg, {}, [](double, const Eigen::VectorXd&, int) {});
  if (flag != TerminalFlag::ReachedHorizon) {
    throw std::runtime_error(std::string("linearized flow: integration ended with ") + terminal_flag_name(flag));
  }
  return StateVec(std::move(v), w.layout());
}

/// Integrates v' = J(e) v, v(0) = w over [0, T].
inline StateVec linearized_flow_apply(const Model& model, const StateVec& e, const StateVec& w,
                                      double horizon, IntegratorConfig cfg = linearization_integrator()) {
  require(w.layout() == model.layout(), "linearized_flow_apply: direction does not match model layout");
  return linearized_flow_apply(linearize(model, e), w, horizon, cfg);
}

/// exp(T J) w for J cooperative in the orthant `order`, computed so that a
/// nonnegative w gives a result whose sign pattern is exact: the shifted
/// matrix S J S + c I is entrywise nonnegative, and the Taylor sums of
/// short substeps contain only nonnegative terms.
inline StateVec positive_exponential_apply(const SparseMatrix& jac, const StateVec& w, double horizon,
                                           const ConeOrder& order) {
  const Layout layout = w.layout();
  const auto n = static_cast<Eigen::Index>(layout.size());
  Eigen::VectorXd signs(n);
  for (Eigen::Index i = 0; i < n; ++i) signs[i] = order.sign_of(layout, static_cast<std::size_t>(i));
  SparseMatrix b = signs.asDiagonal() * jac * signs.asDiagonal();
  double shift = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) shift = std::max(shift, -b.coeff(i, i));
  SparseMatrix id(n, n);
  id.setIdentity();
  b = b + shift * id;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < b.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(b, k); it; ++it) rows[it.row()] += std::abs(it.value());
  }
  const double bnorm = n ? rows.maxCoeff() : 0.0;  // ||b||_inf
  const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(bnorm * horizon)));
  const double tau = horizon / static_cast<double>(substeps);
  const double damping = std::exp(-shift * tau);

  Eigen::VectorXd v = signs.cwiseProduct(w.values());
  Eigen::VectorXd term(n), sum(n);
  for (std::size_t s = 0; s < substeps; ++s) {
    term = v;
    sum = v;
    for (int k = 1; k <= 60; ++k) {
      term = (tau / k) * (b * term);
      sum += term;
      const double tn = term.lpNorm<Eigen::Infinity>();
      if (tn <= 1e-18 * sum.lpNorm<Eigen::Infinity>()) break;
    }
    v = damping * sum;
  }
  return StateVec(signs.cwiseProduct(v), layout);
}

struct SpectralOptions {
  double horizon = 1.0;
  double power_tol = 1e-8;
  std::size_t max_power_iter = 500;
  double neutral_band = 1e-3;
  // Horizons are doubled up to this value while rho stays in the neutral band.
  double max_horizon = 64.0;
  IntegratorConfig integrator = linearization_integrator();
};

struct SpectralResult {
  bool converged = false;
  double rho = std::numeric_limits<double>::quiet_NaN();
  StateVec principal_vector;
  double horizon = 1.0;
  std::size_t iterations = 0;
};

namespace detail {

// Scales so that the largest-magnitude (sign-adjusted) entry is +1.
inline double normalize_sup(Eigen::VectorXd& v, const Eigen::VectorXd& signs) {
  Eigen::Index arg = 0;
  const double r = v.cwiseAbs().maxCoeff(&arg);
  if (r == 0.0) return 0.0;
  v /= (v[arg] * signs[arg] > 0.0 ? r : -r);
  return r;
}

inline Eigen::VectorXd order_signs(const Layout& layout, const ConeOrder* order) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(layout.size()));
  if (order) {
    for (std::size_t i = 0; i < layout.size(); ++i) s[static_cast<Eigen::Index>(i)] = order->sign_of(layout, i);
  }
  return s;
}

}  // namespace detail

/// Power iteration on w -> exp(T J(e)) w with sup-norm normalization,
/// started from `start` (the all-ones vector by default).
inline SpectralResult spectral_radius(const FrozenLinearization& lin, double horizon,
                                      const SpectralOptions& opts = {},
                                      const std::optional<StateVec>& start = std::nullopt,
                                      const ConeOrder* order = nullptr) {
  require(horizon > 0.0, "spectral_radius: horizon must be positive");
  const Layout layout = lin.layout();
  const Eigen::VectorXd signs = detail::order_signs(layout, order);
  SpectralResult out;
  out.horizon = horizon;
  Eigen::VectorXd w = start ? start->values() : signs;
  if (detail::normalize_sup(w, signs) == 0.0) w = signs;
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 1; k <= opts.max_power_iter; ++k) {
    Eigen::VectorXd z = linearized_flow_apply(lin, StateVec(w, layout), horizon, opts.integrator).values();
    const double r = detail::normalize_sup(z, signs);
    out.iterations = k;
    if (r == 0.0) break;
    const double drift = (z - w).lpNorm<Eigen::Infinity>();
    w.swap(z);
    out.rho = r;
    if (k >= 2 && std::abs(r - previous) < opts.power_tol * r && drift < 1e3 * opts.power_tol) {
      out.converged = true;
      break;
    }
    previous = r;
  }
  out.principal_vector = StateVec(w, layout);
  return out;
}

inline SpectralResult spectral_radius(const Model& model, const StateVec& e, double horizon,
                                      const SpectralOptions& opts = {}) {
  return spectral_radius(linearize(model, e), horizon, opts);
}

enum class Stability { LinearlyStable, NeutrallyStable, LinearlyUnstable };

inline const char* stability_name(Stability s) {
  switch (s) {
    case Stability::LinearlyStable: return "linearly_stable";
    case Stability::NeutrallyStable: return "neutrally_stable";
    case Stability::LinearlyUnstable: return "linearly_unstable";
  }
  return "?";
}

inline Stability classify_stability(double rho, double neutral_band = 1e-3) {
  require(rho > 0.0, "classify: rho must be positive");
  if (rho < 1.0 - neutral_band) return Stability::LinearlyStable;
  if (rho > 1.0 + neutral_band) return Stability::LinearlyUnstable;
  return Stability::NeutrallyStable;
}

/// Membership in the set of linearly or neutrally stable equilibria.
inline bool in_stable_set(Stability s) { return s != Stability::LinearlyUnstable; }

struct IrreducibilityReport {
  bool principal_positive = false;
  bool probes_positive = false;
  std::size_t probes = 0;

  bool irreducible() const { return principal_positive && probes_positive; }
};

/// Strong positivity of the linearized flow at e: the Perron vector must be
/// strictly positive and every probe direction must map into the interior.
inline IrreducibilityReport check_irreducible(const FrozenLinearization& lin, const StateVec& principal,
                                              double horizon, const ConeOrder& order,
                                              std::uint64_t probe_seed = 0x5eed) {
  const Layout layout = lin.layout();
  IrreducibilityReport report;
  {
    Eigen::VectorXd p = order.adjusted_difference(StateVec::zeros(layout), principal);
    Eigen::Index arg = 0;
    p.cwiseAbs().maxCoeff(&arg);
    if (p[arg] < 0.0) p = -p;
    report.principal_positive = p.size() > 0 && p.minCoeff() > order.eta();
  }
  constexpr std::size_t kMaxProbes = 32;
  const std::size_t n = layout.size();
  std::vector<StateVec> probes;
  if (n <= kMaxProbes) {
    for (std::size_t i = 0; i < n; ++i) {
      StateVec e = StateVec::zeros(layout);
      e[i] = order.sign_of(layout, i);
      probes.push_back(std::move(e));
    }
  } else {
    Rng rng(probe_seed);
    for (std::size_t k = 0; k < kMaxProbes; ++k) {
      StateVec e = StateVec::zeros(layout);
      const std::size_t nnz = 1 + rng.next() % 3;
      for (std::size_t q = 0; q < nnz; ++q) {
        const std::size_t i = rng.next() % n;
        e[i] = order.sign_of(layout, i) * rng.uniform(0.5, 1.0);
      }
      probes.push_back(std::move(e));
    }
  }
  report.probes = probes.size();
  report.probes_positive = true;
  for (const StateVec& probe : probes) {
    const StateVec image = positive_exponential_apply(lin.matrix(), probe, horizon, order);
    const Eigen::VectorXd adj = order.adjusted_difference(StateVec::zeros(layout), image);
    if (!(adj.minCoeff() > 0.0)) {
      report.probes_positive = false;
      break;
    }
  }
  return report;
}

struct EquilibriumRecord {
  StateVec state;
  double residual = 0.0;
  double horizon = 1.0;
  double rho = 1.0;
  Stability stability = Stability::NeutrallyStable;
  StateVec principal_vector;
  bool irreducible = false;
  bool spectral_converged = false;

  /// log(rho) / T, the dominant growth rate of the linearization.
  double growth_rate() const { return std::log(rho) / horizon; }
};

/// Spectral radius with horizon escalation: rho(T) = rho(1)^T, so a result in
/// the neutral band at T is re-measured at 2T until decided or max_horizon.
inline EquilibriumRecord analyze_equilibrium(const Model& model, const NewtonResult& root,
                                             const SpectralOptions& opts, const ConeOrder& order) {
  require(root.success, "analyze_equilibrium: Newton did not converge");
  EquilibriumRecord rec;
  rec.state = root.state;
  rec.residual = root.residual;
  const FrozenLinearization lin = linearize(model, root.state);
  double horizon = opts.horizon;
  SpectralResult sr = spectral_radius(lin, horizon, opts, std::nullopt, &order);
  if (!sr.converged) {
    horizon *= 2.0;
    sr = spectral_radius(lin, horizon, opts, sr.principal_vector, &order);
  }
  while (sr.converged && classify_stability(sr.rho, opts.neutral_band) == Stability::NeutrallyStable &&
         horizon * 2.0 <= opts.max_horizon) {
    horizon *= 2.0;
    sr = spectral_radius(lin, horizon, opts, sr.principal_vector, &order);
  }
  rec.horizon = horizon;
  rec.rho = sr.rho;
  rec.spectral_converged = sr.converged;
  rec.principal_vector = sr.principal_vector;
  rec.stability = classify_stability(sr.rho, opts.neutral_band);
  rec.irreducible = check_irreducible(lin, sr.principal_vector, opts.horizon, order).irreducible();
  return rec;
}

/// Known equilibria, pairwise separated by more than the match radius.
class EquilibriumDB {
 public:
  explicit EquilibriumDB(double match_radius = 1e-4) : match_radius_(match_radius) {}

  double match_radius() const { return match_radius_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<EquilibriumRecord>& records() const { return records_; }
  const EquilibriumRecord& operator[](std::size_t id) const { return records_[id]; }

  /// Id of the stored equilibrium nearest to `u` within the match radius.
  std::optional<std::size_t> match(const StateVec& u) const {
    auto [id, dist] = nearest(u);
    if (id && dist <= match_radius_) return id;
    return std::nullopt;
  }

  std::pair<std::optional<std::size_t>, double> nearest(const StateVec& u) const {
    std::optional<std::size_t> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (records_[i].state.layout() != u.layout()) continue;
      const double d = sup_distance(records_[i].state, u);
      if (d < best_dist) {
        best_dist = d;
        best = i;
      }
    }
    return {best, best_dist};
  }

  /// Merges into a stored record within the match radius (keeping the smaller
  /// residual) or appends. Returns the id.
  std::size_t register_record(EquilibriumRecord rec) {
    if (auto id = match(rec.state)) {
      if (rec.residual < records_[*id].residual) records_[*id] = std::move(rec);
      return *id;
    }
    records_.push_back(std::move(rec));
    return records_.size() - 1;
  }

 private:
  double match_radius_;
  std::vector<EquilibriumRecord> records_;
};

struct SweepOptions {
  std::vector<double> scalar_seeds{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  double cosine_amplitude = 0.5;
  int cosine_modes = 3;
  NewtonOptions newton;
  SpectralOptions spectral;
  double match_radius = 1e-4;
};

/// Profile c + amplitude * cos(k pi x / L) along the first axis, all species.
inline StateVec cosine_profile(const RDModel& model, std::span<const double> c, double amplitude, int mode) {
  StateVec u = model.uniform_state(c);
  const Grid& g = model.grid();
  const std::size_t m = g.node_count();
  for (std::size_t s = 0; s < model.species(); ++s) {
    for (std::size_t j = 0; j < m; ++j) {
      u[s * m + j] += amplitude * std::cos(mode * std::numbers::pi * g.coordinate(j, 0) / g.length(0));
    }
  }
  return u;
}

/// Newton from constant seeds (and, for reaction-diffusion models, from the
/// spatially uniform roots of f plus low cosine modes), then stability
/// analysis of each distinct root. Seeds are processed in a fixed order.
inline EquilibriumDB equilibrium_sweep(const Model& model, const SweepOptions& opts, const ConeOrder& order) {
  EquilibriumDB db(opts.match_radius);
  auto add = [&](const StateVec& seed) {
    const NewtonResult root = find_equilibrium(model, seed, opts.newton);
    if (!root.success || db.match(root.state)) return;
    db.register_record(analyze_equilibrium(model, root, opts.spectral, order));
  };

  const auto* rd = dynamic_cast<const RDModel*>(&model);
  if (!rd) {
    for (double s : opts.scalar_seeds) add(StateVec::constant(model.layout(), s));
    return db;
  }

  const NetworkModel local(rd->reaction(), "reaction");
  std::vector<StateVec> constants;
  for (double s : opts.scalar_seeds) {
    const NewtonResult root = find_equilibrium(local, StateVec::constant(local.layout(), s), opts.newton);
    if (!root.success) continue;
    const bool known = std::any_of(constants.begin(), constants.end(), [&](const StateVec& c) {
      return sup_distance(c, root.state) <= opts.match_radius;
    });
    if (!known) constants.push_back(root.state);
  }
  for (const StateVec& c : constants) {
    const std::vector<double> cv = c.to_vector();
    add(rd->uniform_state(cv));
  }
  for (const StateVec& c : constants) {
    const std::vector<double> cv = c.to_vector();
    for (int k = 1; k <= opts.cosine_modes; ++k) add(cosine_profile(*rd, cv, opts.cosine_amplitude, k));
  }
  return db;
}

}  // namespace monolab
