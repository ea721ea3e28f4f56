#pragma once

// Omega-limit estimation from trajectory tails, classification of initial
// data (convergent / quasiconvergent / neither), and desk checks of the
// convergence criterion, nonordering of limit sets, the limit set dichotomy
// and the inf/sup trap.

#include "monolab/equilibrium.hpp"
#include "monolab/model.hpp"
#include "monolab/order.hpp"
#include "monolab/parallel.hpp"
#include "monolab/semiflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace monolab {

struct ClassifierParams {
  double t_burn = 50.0;
  double t_window = 10.0;
  double sample_dt = 0.1;
  double eps_conv = 1e-6;   // tail diameter below which omega is a point
  double eps_equilibria = 1e-4;
  double eps_flow = 1e-3;
  double delta = 1e-4;      // equilibrium match radius
  double tol_order = 1e-8;
  bool retry_doubled = true;
  IntegratorConfig integrator;
  NewtonOptions newton;
  SpectralOptions spectral;  // for equilibria discovered while classifying
};

struct OmegaEstimate {
  enum class Kind { Point, NonPoint };

  std::vector<StateVec> tail_states;
  std::vector<double> tail_times;
  double diameter = 0.0;
  StateVec mean;
  Kind kind = Kind::Point;
  bool valid = true;
  TerminalFlag flag = TerminalFlag::ReachedHorizon;

  bool is_point() const { return kind == Kind::Point; }

  /// Estimate from an explicit list of states (synthetic or recorded).
  static OmegaEstimate from_states(std::vector<StateVec> states, double eps_conv) {
    require(!states.empty(), "OmegaEstimate: empty tail");
    OmegaEstimate om;
    om.tail_states = std::move(states);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(om.tail_states.front().size()));
    for (const StateVec& s : om.tail_states) sum += s.values();
    om.mean = StateVec(sum / static_cast<double>(om.tail_states.size()), om.tail_states.front().layout());
    for (std::size_t i = 0; i < om.tail_states.size(); ++i) {
      for (std::size_t j = i + 1; j < om.tail_states.size(); ++j) {
        om.diameter = std::max(om.diameter, sup_distance(om.tail_states[i], om.tail_states[j]));
      }
    }
    om.kind = om.diameter <= eps_conv ? Kind::Point : Kind::NonPoint;
    return om;
  }
};

/// Integrates to t_burn + t_window and samples the tail every sample_dt.
inline OmegaEstimate estimate_omega(const Model& model, const StateVec& x0, double t_burn, double t_window,
                                    double sample_dt, const IntegratorConfig& cfg, double eps_conv = 1e-6) {
  require(t_burn > 0.0 && t_window > 0.0, "estimate_omega: t_burn and t_window must be positive");
  require(sample_dt > 0.0, "estimate_omega: sample_dt must be positive");
  const auto samples = static_cast<std::size_t>(std::llround(t_window / sample_dt));
  std::vector<double> times;
  for (std::size_t k = 0; k <= samples; ++k) times.push_back(t_burn + static_cast<double>(k) * sample_dt);
  std::vector<StateVec> tail(times.size());
  std::vector<bool> seen(times.size(), false);
  Eigen::VectorXd u = x0.values();
  const TerminalFlag flag = integrate(model, u, times.back(), cfg, times, [&](double, const Eigen::VectorXd& x, int idx) {
    if (idx >= 0) {
      tail[static_cast<std::size_t>(idx)] = StateVec(x, x0.layout());
      seen[static_cast<std::size_t>(idx)] = true;
    }
  });
  const bool complete = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  if (flag != TerminalFlag::ReachedHorizon || !complete) {
    OmegaEstimate bad;
    bad.valid = false;
    bad.flag = flag;
    bad.kind = OmegaEstimate::Kind::NonPoint;
    bad.diameter = std::numeric_limits<double>::infinity();
    bad.mean = StateVec(u, x0.layout());
    return bad;
  }
  OmegaEstimate om = OmegaEstimate::from_states(std::move(tail), eps_conv);
  om.tail_times = std::move(times);
  om.flag = flag;
  return om;
}

inline OmegaEstimate estimate_omega(const Model& model, const StateVec& x0, const ClassifierParams& p) {
  return estimate_omega(model, x0, p.t_burn, p.t_window, p.sample_dt, p.integrator, p.eps_conv);
}

enum class Tag { Convergent, Quasiconvergent, NonQuasiconvergent, Undetermined };

inline const char* tag_name(Tag t) {
  switch (t) {
    case Tag::Convergent: return "convergent";
    case Tag::Quasiconvergent: return "quasiconvergent";
    case Tag::NonQuasiconvergent: return "nonquasiconvergent";
    case Tag::Undetermined: return "undetermined";
  }
  return "?";
}

struct Evidence {
  double distance = std::numeric_limits<double>::infinity();  // to the cited or nearest equilibrium
  double horizon = 0.0;                                        // t_burn + t_window actually used
  double diameter = std::numeric_limits<double>::infinity();
  double min_flow_norm = std::numeric_limits<double>::quiet_NaN();
  bool blowup = false;
  bool retried = false;
};

struct TrajectoryClass {
  Tag tag = Tag::Undetermined;
  std::optional<std::size_t> equilibrium_id;
  // Root found by Newton from a point-like tail with no match in the
  // database snapshot; the caller registers it and assigns the id.
  std::optional<StateVec> discovered;
  Evidence evidence;
};

struct Classification {
  TrajectoryClass klass;
  OmegaEstimate omega;
};

namespace detail {

inline double distance_to_set(const StateVec& u, const EquilibriumDB& db) {
  return db.nearest(u).second;
}

inline Classification classify_once(const Model& model, const StateVec& x0, const EquilibriumDB& db,
                                    const ClassifierParams& p, double t_burn) {
  Classification out;
  TrajectoryClass& c = out.klass;
  out.omega = estimate_omega(model, x0, t_burn, p.t_window, p.sample_dt, p.integrator, p.eps_conv);
  const OmegaEstimate& om = out.omega;
  c.evidence.horizon = t_burn + p.t_window;
  c.evidence.diameter = om.diameter;
  if (!om.valid) {
    c.evidence.blowup = om.flag == TerminalFlag::Blowup;
    return out;
  }
  auto [nearest, dist] = db.nearest(om.mean);
  c.evidence.distance = dist;

  if (om.is_point()) {
    if (nearest && dist <= p.delta) {
      c.tag = Tag::Convergent;
      c.equilibrium_id = nearest;
      return out;
    }
    const NewtonResult root = find_equilibrium(model, om.mean, p.newton);
    if (root.success) {
      const double d = sup_distance(root.state, om.mean);
      if (d <= p.delta) {
        c.tag = Tag::Convergent;
        c.evidence.distance = d;
        if (auto id = db.match(root.state)) {
          c.equilibrium_id = id;
        } else {
          c.discovered = root.state;
        }
        return out;
      }
    }
    return out;
  }

  double worst = 0.0;
  double min_flow = std::numeric_limits<double>::infinity();
  for (const StateVec& s : om.tail_states) {
    worst = std::max(worst, distance_to_set(s, db));
    min_flow = std::min(min_flow, model.residual(s));
  }
  c.evidence.min_flow_norm = min_flow;
  if (!db.empty() && worst <= p.eps_equilibria) {
    c.tag = Tag::Quasiconvergent;
    c.evidence.distance = worst;
    return out;
  }
  if (min_flow > p.eps_flow) c.tag = Tag::NonQuasiconvergent;
  return out;
}

}  // namespace detail

/// Classification against a frozen database snapshot. Undetermined and
/// nonquasiconvergent verdicts are re-examined once with a doubled burn-in;
/// slow transients (moving fronts) otherwise pass the flow-norm test.
inline Classification classify_with_omega(const Model& model, const StateVec& x0, const EquilibriumDB& db,
                                          const ClassifierParams& p) {
  Classification c = detail::classify_once(model, x0, db, p, p.t_burn);
  const bool unsettled = c.klass.tag == Tag::Undetermined || c.klass.tag == Tag::NonQuasiconvergent;
  if (unsettled && p.retry_doubled && !c.klass.evidence.blowup) {
    c = detail::classify_once(model, x0, db, p, 2.0 * p.t_burn);
    c.klass.evidence.retried = true;
  }
  return c;
}

inline TrajectoryClass classify(const Model& model, const StateVec& x0, const EquilibriumDB& db,
                                const ClassifierParams& p) {
  return classify_with_omega(model, x0, db, p).klass;
}

/// Analyzes and registers a discovered root; returns its id.
inline std::size_t register_discovery(const Model& model, EquilibriumDB& db, const StateVec& root,
                                      const ClassifierParams& p, const ConeOrder& order) {
  if (auto id = db.match(root)) return *id;
  NewtonResult nr;
  nr.success = true;
  nr.state = root;
  nr.residual = model.residual(root);
  return db.register_record(analyze_equilibrium(model, nr, p.spectral, order));
}

/// Serial classification that registers newly discovered equilibria.
inline Classification classify_and_register(const Model& model, const StateVec& x0, EquilibriumDB& db,
                                            const ClassifierParams& p, const ConeOrder& order) {
  Classification c = classify_with_omega(model, x0, db, p);
  if (c.klass.discovered) {
    c.klass.equilibrium_id = register_discovery(model, db, *c.klass.discovered, p, order);
    c.klass.discovered.reset();
  }
  return c;
}

/// Two-phase batch classification: parallel pass over a frozen snapshot,
/// index-ordered merge of discoveries, then one reclassification pass over
/// the affected inputs. The result does not depend on `parallel_for`.
inline std::vector<Classification> classify_all(const Model& model, const std::vector<StateVec>& inputs,
                                                EquilibriumDB& db, const ClassifierParams& p,
                                                const ConeOrder& order,
                                                const ParallelFor& parallel_for = serial_for) {
  std::vector<Classification> out(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) { out[i] = classify_with_omega(model, inputs[i], db, p); });
  std::vector<std::size_t> redo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].klass.discovered) continue;
    register_discovery(model, db, *out[i].klass.discovered, p, order);
    redo.push_back(i);
  }
  if (redo.empty()) return out;
  parallel_for(redo.size(), [&](std::size_t k) {
    const std::size_t i = redo[k];
    out[i] = classify_with_omega(model, inputs[i], db, p);
  });
  // A second-round discovery would need another merge; fall back to matching.
  for (std::size_t i : redo) {
    TrajectoryClass& c = out[i].klass;
    if (c.discovered) {
      c.equilibrium_id = db.match(*c.discovered);
      if (!c.equilibrium_id) c.tag = Tag::Undetermined;
      c.discovered.reset();
    }
  }
  return out;
}

struct ConvergenceCriterionReport {
  bool applicable = false;
  bool increasing = false;  // Phi_T(x) > x (else Phi_T(x) < x when applicable)
  bool satisfied = true;    // vacuous when not applicable
  TrajectoryClass klass;
};

/// +1 when Phi_T(x) > x, -1 when Phi_T(x) < x, 0 otherwise (or on failure).
inline int convergence_criterion_direction(const Model& model, const StateVec& x, double horizon,
                                           const ClassifierParams& p, const ConeOrder& order) {
  Eigen::VectorXd u = x.values();
  const TerminalFlag flag = integrate(model, u, horizon, p.integrator, {}, [](double, const Eigen::VectorXd&, int) {});
  if (flag != TerminalFlag::ReachedHorizon) return 0;
  const Eigen::VectorXd up = order.adjusted_difference(x, StateVec(u, x.layout()));
  if (up.minCoeff() >= 0.0 && up.maxCoeff() > p.tol_order) return 1;
  if (up.maxCoeff() <= 0.0 && up.minCoeff() < -p.tol_order) return -1;
  return 0;
}

/// If Phi_T(x) > x or Phi_T(x) < x, the orbit of x must converge.
inline ConvergenceCriterionReport check_convergence_criterion(const Model& model, const StateVec& x, double horizon,
                                                              EquilibriumDB& db, const ClassifierParams& p,
                                                              const ConeOrder& order) {
  ConvergenceCriterionReport r;
  const int dir = convergence_criterion_direction(model, x, horizon, p, order);
  if (dir == 0) return r;
  r.applicable = true;
  r.increasing = dir > 0;
  r.klass = classify_and_register(model, x, db, p, order).klass;
  r.satisfied = r.klass.tag == Tag::Convergent;
  return r;
}

/// No two distinct tail states may be strictly ordered. Pairs closer than
/// eps_conv are integrator noise and skipped.
inline bool check_nonordering(const OmegaEstimate& omega, const ConeOrder& order, double tol_order = 1e-8,
                              double eps_conv = 1e-6) {
  require(omega.valid, "check_nonordering: invalid omega estimate");
  const auto& tail = omega.tail_states;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    for (std::size_t j = i + 1; j < tail.size(); ++j) {
      if (sup_distance(tail[i], tail[j]) <= eps_conv) continue;
      if (cone_lt_margin(tail[i], tail[j], order, tol_order) || cone_lt_margin(tail[j], tail[i], order, tol_order)) {
        return false;
      }
    }
  }
  return true;
}

enum class LsdVerdict { OrderedLimits, SameEquilibrium, Violation, NotApplicable };

inline const char* lsd_verdict_name(LsdVerdict v) {
  switch (v) {
    case LsdVerdict::OrderedLimits: return "ordered_limits";
    case LsdVerdict::SameEquilibrium: return "same_equilibrium";
    case LsdVerdict::Violation: return "violation";
    case LsdVerdict::NotApplicable: return "not_applicable";
  }
  return "?";
}

struct LsdReport {
  LsdVerdict verdict = LsdVerdict::Violation;
  Classification x;
  Classification y;
  // Witness pair of tail indices (x, y) breaking the ordering, if any.
  std::optional<std::pair<std::size_t, std::size_t>> witness;

  bool ok() const { return verdict == LsdVerdict::OrderedLimits || verdict == LsdVerdict::SameEquilibrium; }
};

/// Verdict for a pair already classified (x < y): either omega(x) < omega(y)
/// over all tail pairs, or both converge to the same equilibrium.
inline LsdReport judge_lsd(Classification x, Classification y, const ClassifierParams& p, const ConeOrder& order) {
  LsdReport r;
  r.x = std::move(x);
  r.y = std::move(y);
  const TrajectoryClass& cx = r.x.klass;
  const TrajectoryClass& cy = r.y.klass;
  if (!r.x.omega.valid || !r.y.omega.valid) {
    r.verdict = LsdVerdict::NotApplicable;
    return r;
  }
  if (cx.tag == Tag::Convergent && cy.tag == Tag::Convergent && cx.equilibrium_id == cy.equilibrium_id) {
    r.verdict = LsdVerdict::SameEquilibrium;
    return r;
  }
  bool strict = false;
  const auto& tx = r.x.omega.tail_states;
  const auto& ty = r.y.omega.tail_states;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    for (std::size_t j = 0; j < ty.size(); ++j) {
      const Eigen::VectorXd d = order.adjusted_difference(tx[i], ty[j]);
      if (d.minCoeff() < -p.tol_order) {
        r.witness = std::make_pair(i, j);
        r.verdict = LsdVerdict::Violation;
        return r;
      }
      strict = strict || d.maxCoeff() > p.tol_order;
    }
  }
  const bool differ = sup_distance(r.x.omega.mean, r.y.omega.mean) > p.delta;
  r.verdict = (strict && differ) ? LsdVerdict::OrderedLimits : LsdVerdict::Violation;
  return r;
}

inline LsdReport check_lsd(const Model& model, const StateVec& x, const StateVec& y, EquilibriumDB& db,
                           const ClassifierParams& p, const ConeOrder& order) {
  require(cone_lt(x, y, order), "check_lsd: precondition x < y violated");
  Classification cx = classify_and_register(model, x, db, p, order);
  Classification cy = classify_and_register(model, y, db, p, order);
  return judge_lsd(std::move(cx), std::move(cy), p, order);
}

struct TrapReport {
  bool ok = false;
  StateVec bound;  // inf (or sup) of the tail
  TrajectoryClass klass;
};

namespace detail {

inline TrapReport trap_check(const Model& model, const OmegaEstimate& omega, const ConeOrder& order,
                             EquilibriumDB& db, const ClassifierParams& p, bool lower) {
  require(omega.valid, "trap check: invalid omega estimate");
  TrapReport r;
  r.bound = lower ? pointwise_inf(omega.tail_states, order) : pointwise_sup(omega.tail_states, order);
  r.klass = classify_and_register(model, r.bound, db, p, order).klass;
  if (r.klass.tag != Tag::Convergent || !r.klass.equilibrium_id) return r;
  const StateVec& limit = db[*r.klass.equilibrium_id].state;
  const bool strict = !omega.is_point();
  r.ok = true;
  for (const StateVec& s : omega.tail_states) {
    const bool below = lower ? cone_leq_within(limit, s, order, p.delta) : cone_leq_within(s, limit, order, p.delta);
    if (!below || (strict && sup_distance(limit, s) <= p.delta)) {
      r.ok = false;
      break;
    }
  }
  return r;
}

}  // namespace detail

/// The orbit of a = inf omega(x) converges to some p below omega(x).
inline TrapReport inf_trap_check(const Model& model, const OmegaEstimate& omega, const ConeOrder& order,
                                 EquilibriumDB& db, const ClassifierParams& p) {
  return detail::trap_check(model, omega, order, db, p, true);
}

/// Mirror of inf_trap_check using b = sup omega(x).
inline TrapReport sup_trap_check(const Model& model, const OmegaEstimate& omega, const ConeOrder& order,
                                 EquilibriumDB& db, const ClassifierParams& p) {
  return detail::trap_check(model, omega, order, db, p, false);
}

}  // namespace monolab
