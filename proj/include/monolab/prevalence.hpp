#pragma once

// Sampling experiments: classification along segments, unordered basins of
// unstable equilibria, and convergence to uniform equilibria for
// reaction-diffusion systems.

#include "monolab/equilibrium.hpp"
#include "monolab/limits.hpp"
#include "monolab/order.hpp"
#include "monolab/parallel.hpp"
#include "monolab/random.hpp"
#include "monolab/rd.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace monolab {

inline constexpr std::array<Tag, 4> kAllTags{Tag::Convergent, Tag::Quasiconvergent, Tag::NonQuasiconvergent,
                                             Tag::Undetermined};

/// Fraction of segment points carrying `tag`.
inline double segment_measure(const std::vector<TrajectoryClass>& results, Tag tag) {
  if (results.empty()) return 0.0;
  std::size_t count = 0;
  for (const TrajectoryClass& c : results) count += c.tag == tag ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(results.size());
}

struct LineReport {
  std::size_t n = 0;
  std::vector<double> t_params;
  std::vector<TrajectoryClass> points;
  std::array<double, 4> masses{};  // indexed like kAllTags
  std::vector<std::size_t> limit_chain;
  bool chain_ordered = true;
  std::size_t unstable_hits = 0;

  double mass(Tag tag) const { return masses[static_cast<std::size_t>(tag)]; }
};

/// Classifies the N+1 points x0 + (k/N) v.
inline LineReport line_experiment(const Model& model, const Segment& segment, std::size_t n, EquilibriumDB& db,
                                  const ClassifierParams& params, const ConeOrder& order,
                                  const ParallelFor& parallel_for = serial_for) {
  require(n >= 2, "line_experiment: N must be >= 2");
  LineReport r;
  r.n = n;
  const std::vector<StateVec> pts = segment_points(segment, n);
  for (std::size_t k = 0; k <= n; ++k) r.t_params.push_back(static_cast<double>(k) / static_cast<double>(n));
  const std::vector<Classification> cls = classify_all(model, pts, db, params, order, parallel_for);
  for (const Classification& c : cls) r.points.push_back(c.klass);
  for (Tag t : kAllTags) r.masses[static_cast<std::size_t>(t)] = segment_measure(r.points, t);

  for (const TrajectoryClass& c : r.points) {
    if (c.tag != Tag::Convergent || !c.equilibrium_id) continue;
    const std::size_t id = *c.equilibrium_id;
    if (db[id].stability == Stability::LinearlyUnstable) ++r.unstable_hits;
    if (std::find(r.limit_chain.begin(), r.limit_chain.end(), id) == r.limit_chain.end()) r.limit_chain.push_back(id);
  }
  for (std::size_t i = 1; i < r.limit_chain.size(); ++i) {
    if (!cone_leq(db[r.limit_chain[i - 1]].state, db[r.limit_chain[i]].state, order)) r.chain_ordered = false;
  }
  return r;
}

/// Random initial data. Reaction-diffusion models draw
/// u_s(x) = c_s + sum_{k=1..modes} b_sk cos(k pi x / L) along the first axis
/// (plus optional uniform node noise); network models draw from `c_box`.
struct SamplerSpec {
  Box c_box;                                 // per-species range of c_s
  std::pair<double, double> b_range{-0.1, 0.1};
  int modes = 4;
  bool uniform_noise = false;
  double noise_amplitude = 0.0;
};

inline StateVec sample_initial(const Model& model, const SamplerSpec& spec, Rng& rng) {
  const Layout layout = model.layout();
  require(spec.c_box.size() == layout.species, "sampler: c_box needs one range per species");
  StateVec u = StateVec::zeros(layout);
  const auto* rd = dynamic_cast<const RDModel*>(&model);
  for (std::size_t s = 0; s < layout.species; ++s) {
    const double c = rng.uniform(spec.c_box[s].first, spec.c_box[s].second);
    std::vector<double> b;
    if (rd) {
      for (int k = 1; k <= spec.modes; ++k) b.push_back(rng.uniform(spec.b_range.first, spec.b_range.second));
    }
    for (std::size_t j = 0; j < layout.nodes; ++j) {
      double v = c;
      if (rd) {
        const double x = rd->grid().coordinate(j, 0) / rd->grid().length(0);
        for (int k = 1; k <= spec.modes; ++k) v += b[static_cast<std::size_t>(k - 1)] * std::cos(k * std::numbers::pi * x);
      }
      u[layout.index(s, j)] = v;
    }
  }
  if (rd && spec.uniform_noise) {
    for (std::size_t i = 0; i < layout.size(); ++i) u[i] += rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
  }
  return u;
}

/// Strictly positive perturbation w: levels drawn from `level` per species, with
/// a smooth cosine ripple of relative size below 1/2 on reaction-diffusion models.
inline StateVec sample_positive(const Model& model, std::pair<double, double> level, const ConeOrder& order,
                                Rng& rng) {
  require(level.first > 0.0 && level.second >= level.first, "sample_positive: level range must be positive");
  const Layout layout = model.layout();
  const auto* rd = dynamic_cast<const RDModel*>(&model);
  StateVec w = StateVec::zeros(layout);
  for (std::size_t s = 0; s < layout.species; ++s) {
    const double c = rng.uniform(level.first, level.second);
    const double ripple = rd ? rng.uniform(-0.25, 0.25) : 0.0;
    for (std::size_t j = 0; j < layout.nodes; ++j) {
      double v = c;
      if (rd) v *= 1.0 + ripple * std::cos(std::numbers::pi * rd->grid().coordinate(j, 0) / rd->grid().length(0));
      w[layout.index(s, j)] = order.sign_of(layout, layout.index(s, j)) * v;
    }
  }
  return w;
}

struct BasinReport {
  std::size_t pairs_tested = 0;
  std::size_t ordered_pairs_found = 0;
  std::vector<std::size_t> witnesses;  // trial indices
};

/// Counts random ordered pairs (x, x + w) whose members both converge to the
/// unstable equilibrium `target`.
inline BasinReport basin_unordered_check(const Model& model, std::size_t target, std::size_t trials,
                                         const SamplerSpec& sampler, std::pair<double, double> w_level,
                                         std::uint64_t seed, EquilibriumDB& db, const ClassifierParams& params,
                                         const ConeOrder& order, const ParallelFor& parallel_for = serial_for) {
  require(target < db.size(), "basin_unordered_check: unknown equilibrium id");
  require(db[target].stability == Stability::LinearlyUnstable,
          "basin_unordered_check: equilibrium must be linearly unstable");
  std::vector<StateVec> inputs;
  inputs.reserve(2 * trials);
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng = Rng::substream(seed, i);
    const StateVec x = sample_initial(model, sampler, rng);
    const StateVec w = sample_positive(model, w_level, order, rng);
    inputs.push_back(x);
    inputs.emplace_back(x.values() + w.values(), x.layout());
  }
  const std::vector<Classification> cls = classify_all(model, inputs, db, params, order, parallel_for);
  BasinReport r;
  r.pairs_tested = trials;
  auto hits = [&](const TrajectoryClass& c) { return c.tag == Tag::Convergent && c.equilibrium_id == target; };
  for (std::size_t i = 0; i < trials; ++i) {
    if (hits(cls[2 * i].klass) && hits(cls[2 * i + 1].klass)) {
      ++r.ordered_pairs_found;
      r.witnesses.push_back(i);
    }
  }
  return r;
}

struct HomogeneityTrial {
  StateVec initial;
  TrajectoryClass klass;
  std::vector<double> final_variation;  // per species, of the last tail state
  bool uniform = false;
  bool blowup = false;
};

struct HomogeneityReport {
  std::vector<HomogeneityTrial> trials;
  double fraction_uniform = 0.0;
  std::size_t blowups = 0;
  std::size_t nonuniform_limits = 0;  // Convergent to a nonconstant equilibrium
  std::size_t undetermined = 0;
  CooperativityReport cooperativity;
};

/// Draws M initial data and records which trials converge to a spatially
/// uniform equilibrium (sup-variation at most eps_unif in every species).
inline HomogeneityReport homogeneity_experiment(const RDModel& model, const SamplerSpec& sampler,
                                                const Box& reaction_box, std::size_t trials, std::uint64_t seed,
                                                EquilibriumDB& db, const ClassifierParams& params,
                                                const ConeOrder& order, double eps_unif = 1e-4,
                                                const ParallelFor& parallel_for = serial_for) {
  HomogeneityReport r;
  r.cooperativity = check_cooperative_irreducible(model.reaction(), reaction_box, 1000, seed);
  require(r.cooperativity.passed(), "homogeneity_experiment: reaction is not cooperative and irreducible on the box");
  std::vector<StateVec> inputs;
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng = Rng::substream(seed, i);
    inputs.push_back(sample_initial(model, sampler, rng));
  }
  const std::vector<Classification> cls = classify_all(model, inputs, db, params, order, parallel_for);
  std::size_t uniform = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    HomogeneityTrial t;
    t.initial = inputs[i];
    t.klass = cls[i].klass;
    t.blowup = t.klass.evidence.blowup;
    if (cls[i].omega.valid) t.final_variation = model.species_variation(cls[i].omega.tail_states.back());
    if (t.klass.tag == Tag::Convergent && t.klass.equilibrium_id) {
      const std::vector<double> v = model.species_variation(db[*t.klass.equilibrium_id].state);
      t.uniform = std::all_of(v.begin(), v.end(), [&](double x) { return x <= eps_unif; });
      if (!t.uniform) ++r.nonuniform_limits;
    } else if (!t.blowup) {
      ++r.undetermined;
    }
    r.blowups += t.blowup ? 1 : 0;
    uniform += t.uniform ? 1 : 0;
    r.trials.push_back(std::move(t));
  }
  r.fraction_uniform = trials ? static_cast<double>(uniform) / static_cast<double>(trials) : 0.0;
  return r;
}

}  // namespace monolab
