#pragma once

// Config-driven experiments: parsing and validation, dot-path overrides,
// execution on a worker pool, and report files.

#include "monolab/equilibrium.hpp"
#include "monolab/fixtures.hpp"
#include "monolab/io.hpp"
#include "monolab/limits.hpp"
#include "monolab/parallel.hpp"
#include "monolab/prevalence.hpp"
#include "monolab/rd.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace monolab {

inline constexpr int kSchemaVersion = 1;

/// Invalid or unreadable configuration; `field` is the dot path at fault.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace config {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline Json default_sampler() {
  return Json{{"c_range", Json::array({-1.0, 1.0})},
              {"b_range", Json::array({-0.1, 0.1})},
              {"modes", 4},
              {"uniform_noise", false},
              {"noise_amplitude", 0.0}};
}

inline Json experiment_defaults(const std::string& type) {
  if (type == "equilibria") return Json::object();
  if (type == "line") return Json{{"base", nullptr}, {"direction", nullptr}, {"n", 100}};
  if (type == "basin") {
    return Json{{"trials", 200}, {"targets", "unstable"}, {"sampler", default_sampler()},
                {"w_level", Json::array({0.01, 0.5})}};
  }
  if (type == "homogeneity") {
    return Json{{"trials", 50}, {"sampler", default_sampler()}, {"reaction_box", Json::array({-2.0, 2.0})},
                {"eps_unif", 1e-4}};
  }
  if (type == "properties") {
    return Json{{"pairs", 200},
                {"lsd_pairs", 100},
                {"basin_trials", 200},
                {"cc_horizon", 1.0},
                {"monotone_times", Json::array({0.5, 1.0, 2.0, 5.0, 10.0})},
                {"sampler", default_sampler()},
                {"w_level", Json::array({0.01, 0.5})}};
  }
  throw ConfigError("experiment.type",
                    "unknown experiment '" + type + "' (expected equilibria, line, basin, homogeneity or properties)");
}

/// Every key the runner understands, with its default.
inline Json defaults(const std::string& experiment_type) {
  Json d;
  d["schema_version"] = kSchemaVersion;
  d["model"] = Json::object();
  d["order"] = Json{{"signs", nullptr}, {"eta", ConeOrder::kDefaultMargin}};
  d["integrator"] = Json{{"scheme", "auto"},  {"rel_tol", 1e-8},       {"abs_tol", 1e-10},
                         {"dt", 0.05},        {"max_steps", 2000000}, {"blowup_threshold", 1e8}};
  d["newton"] = Json{{"tol", 1e-10}, {"max_iter", 50}, {"max_halvings", 30}, {"dense_limit", 64}};
  d["spectral"] = Json{{"horizon", 1.0},      {"power_tol", 1e-8},   {"max_power_iter", 500},
                       {"neutral_band", 1e-3}, {"max_horizon", 64.0}};
  d["sweep"] = Json{{"scalar_seeds", Json::array({-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0})},
                    {"cosine_amplitude", 0.5},
                    {"cosine_modes", 3},
                    {"match_radius", 1e-4}};
  d["classifier"] = Json{{"t_burn", 50.0},      {"t_window", 10.0},      {"sample_dt", 0.1},
                         {"eps_conv", 1e-6},    {"eps_equilibria", 1e-4}, {"eps_flow", 1e-3},
                         {"delta", 1e-4},       {"tol_order", 1e-8},     {"retry_doubled", true}};
  Json e = experiment_defaults(experiment_type);
  e["type"] = experiment_type;
  d["experiment"] = e;
  d["seed"] = 1;
  d["output_dir"] = "monolab-out";
  return d;
}

// Overlays `user` onto `base`, rejecting keys absent from `base`. Objects
// whose default is empty (the model section) are taken verbatim.
inline void merge(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string here = join(path, it.key());
    if (!base.contains(it.key())) throw ConfigError(here, "unknown key");
    Json& slot = base[it.key()];
    if (slot.is_object() && !slot.empty()) {
      merge(slot, it.value(), here);
    } else {
      slot = it.value();
    }
  }
}

inline Json parse_override_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

/// Applies "a.b.c=value" to the raw document; the value is JSON if it parses
/// as JSON and a string otherwise.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--override", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const Json value = parse_override_value(assignment.substr(eq + 1));
  Json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError(key, "empty path segment in override");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(parts[i]);
      } catch (const std::exception&) {
        throw ConfigError(key, "'" + parts[i] + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError(key, "array index out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = Json::object();
      node = &(*node)[parts[i]];
    }
    if (last) *node = value;
  }
}

inline const Json& field(const Json& sec, const std::string& path, const std::string& key) {
  if (!sec.contains(key)) throw ConfigError(join(path, key), "missing");
  return sec.at(key);
}

inline double number(const Json& sec, const std::string& path, const std::string& key) {
  const Json& v = field(sec, path, key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  return v.get<double>();
}

inline double positive(const Json& sec, const std::string& path, const std::string& key) {
  const double v = number(sec, path, key);
  if (!(v > 0.0)) throw ConfigError(join(path, key), "must be positive");
  return v;
}

inline std::size_t count(const Json& sec, const std::string& path, const std::string& key, std::size_t min = 0) {
  const Json& v = field(sec, path, key);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
    throw ConfigError(join(path, key), "expected an integer >= " + std::to_string(min));
  }
  return v.get<std::size_t>();
}

inline bool boolean(const Json& sec, const std::string& path, const std::string& key) {
  const Json& v = field(sec, path, key);
  if (!v.is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return v.get<bool>();
}

inline std::string text(const Json& sec, const std::string& path, const std::string& key) {
  const Json& v = field(sec, path, key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> numbers(const Json& sec, const std::string& path, const std::string& key) {
  const Json& v = field(sec, path, key);
  if (!v.is_array()) throw ConfigError(join(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (const Json& e : v) {
    if (!e.is_number()) throw ConfigError(join(path, key), "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::pair<double, double> range(const Json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(where, "expected [lo, hi]");
  }
  const double lo = v[0].get<double>(), hi = v[1].get<double>();
  if (!(lo <= hi)) throw ConfigError(where, "expected lo <= hi");
  return {lo, hi};
}

// [lo, hi] for every species, or one [lo, hi] per species.
inline Box box(const Json& v, std::size_t species, const std::string& where) {
  if (v.is_array() && !v.empty() && v[0].is_array()) {
    if (v.size() != species) throw ConfigError(where, "expected " + std::to_string(species) + " ranges");
    Box b;
    for (std::size_t i = 0; i < v.size(); ++i) b.push_back(range(v[i], where + "." + std::to_string(i)));
    return b;
  }
  return Box(species, range(v, where));
}

inline void check_keys(const Json& sec, const std::string& path, const std::set<std::string>& allowed) {
  if (!sec.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = sec.begin(); it != sec.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(join(path, it.key()), "unknown key");
  }
}

}  // namespace config

/// Validated configuration plus the resolved document echoed in summary.json.
struct ExperimentConfig {
  Json resolved;
  std::shared_ptr<const Model> model;
  std::string model_name;
  ConeOrder order = ConeOrder::standard(1);
  ClassifierParams classifier;
  SweepOptions sweep;
  std::string experiment;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
};

namespace config {

inline std::shared_ptr<const Model> build_model(const Json& m, std::string& name) {
  const std::string path = "model";
  if (!m.is_object() || m.empty()) throw ConfigError(path, "expected {\"fixture\": ...} or a custom model");
  if (m.contains("fixture")) {
    check_keys(m, path, {"fixture"});
    name = text(m, path, "fixture");
    if (!is_fixture(name)) {
      std::string known;
      for (const FixtureInfo& f : list_fixtures()) known += (known.empty() ? "" : ", ") + f.id;
      throw ConfigError("model.fixture", "unknown fixture '" + name + "' (known: " + known + ")");
    }
    return make_fixture(name);
  }
  check_keys(m, path, {"name", "arity", "reaction", "diffusion", "grid"});
  name = m.contains("name") ? text(m, path, "name") : std::string("custom");
  const std::size_t arity = count(m, path, "arity", 1);
  ReactionField reaction = [&] {
    try {
      return ReactionField::parse(text(m, path, "reaction"), arity);
    } catch (const ParseError& e) {
      throw ConfigError("model.reaction", std::string(e.what()) + " (at offset " + std::to_string(e.position()) + ")");
    }
  }();
  if (!m.contains("diffusion")) {
    if (m.contains("grid")) throw ConfigError("model.grid", "a grid needs diffusion coefficients");
    return std::make_shared<NetworkModel>(std::move(reaction), name);
  }
  const std::vector<double> diffusion = numbers(m, path, "diffusion");
  if (diffusion.size() != arity) {
    throw ConfigError("model.diffusion", "expected " + std::to_string(arity) + " coefficients");
  }
  for (double d : diffusion) {
    if (!(d >= 0.0)) throw ConfigError("model.diffusion", "coefficients must be >= 0");
  }
  const Json& g = field(m, path, "grid");
  check_keys(g, "model.grid", {"length", "nodes", "lengths"});
  Grid grid = [&] {
    const Json& nodes = field(g, "model.grid", "nodes");
    if (g.contains("lengths")) {
      const std::vector<double> lengths = numbers(g, "model.grid", "lengths");
      if (lengths.size() != 2 || !nodes.is_array() || nodes.size() != 2) {
        throw ConfigError("model.grid", "a rectangle needs lengths [lx, ly] and nodes [nx, ny]");
      }
      return Grid::rectangle(lengths[0], lengths[1], nodes[0].get<std::size_t>(), nodes[1].get<std::size_t>());
    }
    return Grid::interval(positive(g, "model.grid", "length"), count(g, "model.grid", "nodes", 3));
  }();
  return std::make_shared<RDModel>(std::move(grid), diffusion, std::move(reaction), name);
}

inline SamplerSpec sampler(const Json& s, const std::string& path, std::size_t species) {
  check_keys(s, path, {"c_range", "b_range", "modes", "uniform_noise", "noise_amplitude"});
  SamplerSpec spec;
  spec.c_box = box(field(s, path, "c_range"), species, join(path, "c_range"));
  spec.b_range = range(field(s, path, "b_range"), join(path, "b_range"));
  spec.modes = static_cast<int>(count(s, path, "modes"));
  spec.uniform_noise = boolean(s, path, "uniform_noise");
  spec.noise_amplitude = number(s, path, "noise_amplitude");
  return spec;
}

inline std::pair<double, double> w_level(const Json& e) {
  const auto w = range(field(e, "experiment", "w_level"), "experiment.w_level");
  if (!(w.first > 0.0)) throw ConfigError("experiment.w_level", "lower bound must be positive");
  return w;
}

// A list of `species` values is expanded to the uniform state.
inline StateVec state_from(const Json& e, const std::string& key, const Model& model) {
  const std::string where = "experiment." + key;
  if (e.at(key).is_null()) throw ConfigError(where, "missing");
  const std::vector<double> v = numbers(e, "experiment", key);
  const Layout layout = model.layout();
  if (v.size() == layout.size()) return StateVec(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())), layout);
  if (v.size() == layout.species) {
    StateVec u = StateVec::zeros(layout);
    for (std::size_t s = 0; s < layout.species; ++s) {
      for (std::size_t j = 0; j < layout.nodes; ++j) u[layout.index(s, j)] = v[s];
    }
    return u;
  }
  throw ConfigError(where, "expected " + std::to_string(layout.species) + " or " + std::to_string(layout.size()) +
                               " values");
}

}  // namespace config

/// Reads, overrides and validates a configuration document.
inline ExperimentConfig load_config(Json user, const std::vector<std::string>& overrides = {},
                                    std::optional<std::uint64_t> seed = std::nullopt,
                                    std::optional<std::string> output_dir = std::nullopt) {
  using namespace config;
  if (!user.is_object()) throw ConfigError("", "config must be a JSON object");
  for (const std::string& o : overrides) apply_override(user, o);
  if (seed) user["seed"] = *seed;
  if (output_dir) user["output_dir"] = *output_dir;
  if (!user.contains("experiment") || !user["experiment"].is_object() || !user["experiment"].contains("type")) {
    throw ConfigError("experiment.type", "missing (select one of equilibria, line, basin, homogeneity, properties)");
  }
  if (!user["experiment"]["type"].is_string()) throw ConfigError("experiment.type", "expected a string");
  const std::string type = user["experiment"]["type"].get<std::string>();
  Json doc = defaults(type);
  merge(doc, user, "");
  if (doc["schema_version"] != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }

  ExperimentConfig cfg;
  cfg.experiment = type;
  cfg.model = build_model(doc["model"], cfg.model_name);
  const Model& model = *cfg.model;
  const std::size_t species = model.layout().species;

  {
    const Json& o = doc["order"];
    std::vector<int> signs;
    if (o["signs"].is_null()) {
      signs.assign(species, 1);
      doc["order"]["signs"] = signs;
    } else {
      for (double s : numbers(o, "order", "signs")) {
        if (s != 1.0 && s != -1.0) throw ConfigError("order.signs", "entries must be +1 or -1");
        signs.push_back(static_cast<int>(s));
      }
    }
    if (signs.size() != species) throw ConfigError("order.signs", "expected " + std::to_string(species) + " entries");
    cfg.order = ConeOrder(signs, positive(o, "order", "eta"));
  }

  IntegratorConfig integ;
  {
    const Json& s = doc["integrator"];
    const std::string scheme = text(s, "integrator", "scheme");
    if (scheme == "auto") {
      integ.scheme = model.kind() == ModelKind::ReactionDiffusion ? Scheme::ImexCnHeun : Scheme::AdaptiveRK54;
    } else if (scheme == "rk54") {
      integ.scheme = Scheme::AdaptiveRK54;
    } else if (scheme == "imex") {
      integ.scheme = Scheme::ImexCnHeun;
    } else {
      throw ConfigError("integrator.scheme", "expected auto, rk54 or imex");
    }
    doc["integrator"]["scheme"] = integ.scheme == Scheme::AdaptiveRK54 ? "rk54" : "imex";
    integ.rel_tol = positive(s, "integrator", "rel_tol");
    integ.abs_tol = positive(s, "integrator", "abs_tol");
    integ.dt = positive(s, "integrator", "dt");
    integ.max_step_count = count(s, "integrator", "max_steps", 1);
    integ.blowup_threshold = positive(s, "integrator", "blowup_threshold");
  }

  NewtonOptions newton;
  {
    const Json& s = doc["newton"];
    newton.tol = positive(s, "newton", "tol");
    newton.max_iter = count(s, "newton", "max_iter", 1);
    newton.max_halvings = count(s, "newton", "max_halvings");
    newton.dense_limit = count(s, "newton", "dense_limit");
  }

  SpectralOptions spectral;
  {
    const Json& s = doc["spectral"];
    spectral.horizon = positive(s, "spectral", "horizon");
    spectral.power_tol = positive(s, "spectral", "power_tol");
    spectral.max_power_iter = count(s, "spectral", "max_power_iter", 2);
    spectral.neutral_band = positive(s, "spectral", "neutral_band");
    spectral.max_horizon = positive(s, "spectral", "max_horizon");
    if (spectral.max_horizon < spectral.horizon) throw ConfigError("spectral.max_horizon", "must be >= horizon");
  }

  {
    const Json& s = doc["sweep"];
    cfg.sweep.scalar_seeds = numbers(s, "sweep", "scalar_seeds");
    cfg.sweep.cosine_amplitude = number(s, "sweep", "cosine_amplitude");
    cfg.sweep.cosine_modes = static_cast<int>(count(s, "sweep", "cosine_modes"));
    cfg.sweep.match_radius = positive(s, "sweep", "match_radius");
    cfg.sweep.newton = newton;
    cfg.sweep.spectral = spectral;
  }

  {
    const Json& s = doc["classifier"];
    ClassifierParams& p = cfg.classifier;
    p.t_burn = positive(s, "classifier", "t_burn");
    p.t_window = positive(s, "classifier", "t_window");
    p.sample_dt = positive(s, "classifier", "sample_dt");
    p.eps_conv = positive(s, "classifier", "eps_conv");
    p.eps_equilibria = positive(s, "classifier", "eps_equilibria");
    p.eps_flow = positive(s, "classifier", "eps_flow");
    p.delta = positive(s, "classifier", "delta");
    p.tol_order = positive(s, "classifier", "tol_order");
    p.retry_doubled = boolean(s, "classifier", "retry_doubled");
    p.integrator = integ;
    p.newton = newton;
    p.spectral = spectral;
  }

  const Json& seed_field = doc["seed"];
  if (!seed_field.is_number_unsigned() && !(seed_field.is_number_integer() && seed_field.get<long long>() >= 0)) {
    throw ConfigError("seed", "expected a nonnegative integer");
  }
  cfg.seed = seed_field.get<std::uint64_t>();
  cfg.output_dir = text(doc, "", "output_dir");

  // Experiment-specific validation happens up front so errors exit before any work.
  const Json& e = doc["experiment"];
  if (type == "line") {
    config::count(e, "experiment", "n", 2);
    const StateVec v = state_from(e, "direction", model);
    state_from(e, "base", model);
    const StateVec zero = StateVec::zeros(v.layout());
    if (!cone_lt(zero, v, cfg.order)) throw ConfigError("experiment.direction", "must be positive in the order");
  } else if (type == "basin" || type == "properties" || type == "homogeneity") {
    sampler(e["sampler"], "experiment.sampler", species);
    if (type != "homogeneity") w_level(e);
    if (type == "basin") {
      const Json& t = e["targets"];
      if (!(t.is_string() && t == "unstable") && !t.is_array()) {
        throw ConfigError("experiment.targets", "expected \"unstable\" or a list of equilibrium ids");
      }
      count(e, "experiment", "trials", 1);
    }
    if (type == "homogeneity") {
      if (model.kind() != ModelKind::ReactionDiffusion) {
        throw ConfigError("model", "the homogeneity experiment needs a reaction-diffusion model");
      }
      box(e["reaction_box"], species, "experiment.reaction_box");
      count(e, "experiment", "trials", 1);
      positive(e, "experiment", "eps_unif");
    }
    if (type == "properties") {
      count(e, "experiment", "pairs", 1);
      if (count(e, "experiment", "lsd_pairs") > count(e, "experiment", "pairs", 1)) {
        throw ConfigError("experiment.lsd_pairs", "must not exceed experiment.pairs");
      }
      count(e, "experiment", "basin_trials");
      positive(e, "experiment", "cc_horizon");
      for (double t : numbers(e, "experiment", "monotone_times")) {
        if (!(t > 0.0)) throw ConfigError("experiment.monotone_times", "times must be positive");
      }
    }
  }
  cfg.resolved = std::move(doc);
  return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path,
                                         const std::vector<std::string>& overrides = {},
                                         std::optional<std::uint64_t> seed = std::nullopt,
                                         std::optional<std::string> output_dir = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return load_config(std::move(doc), overrides, seed, output_dir);
}

/// Report files keyed by file name, plus the summary and violation count.
struct RunResult {
  Json summary;
  std::map<std::string, std::string> files;
  std::size_t violations = 0;
};

namespace detail {

inline Json masses_json(const std::array<double, 4>& masses) {
  Json j;
  for (Tag t : kAllTags) j[tag_name(t)] = masses[static_cast<std::size_t>(t)];
  return j;
}

inline Json id_list(const std::vector<std::size_t>& ids) {
  Json a = Json::array();
  for (std::size_t id : ids) a.push_back(id);
  return a;
}

inline Json cooperativity_json(const CooperativityReport& r) {
  Json j{{"cooperative", r.cooperative}, {"irreducible", r.irreducible}, {"samples", r.samples_checked}};
  if (r.cooperativity_witness) {
    j["negative_entry"] = Json{{"row", r.cooperativity_witness->row},
                               {"col", r.cooperativity_witness->col},
                               {"value", r.cooperativity_witness->value},
                               {"point", r.cooperativity_witness->point}};
  }
  if (r.irreducibility_witness) {
    j["unreachable"] = Json{{"from", r.irreducibility_witness->row}, {"to", r.irreducibility_witness->col}};
  }
  return j;
}

inline Box reaction_box_for(const SamplerSpec& s) {
  // Sampler levels widened to cover the limits reached from them.
  Box b = s.c_box;
  const double spread = static_cast<double>(s.modes) * std::max(std::abs(s.b_range.first), std::abs(s.b_range.second)) +
                        (s.uniform_noise ? s.noise_amplitude : 0.0);
  for (auto& r : b) {
    r.first = std::min(r.first - spread, -2.0);
    r.second = std::max(r.second + spread, 2.0);
  }
  return b;
}

inline RunResult run_line(const ExperimentConfig& cfg, EquilibriumDB& db, const ParallelFor& pf) {
  const Json& e = cfg.resolved["experiment"];
  const Model& model = *cfg.model;
  const Segment seg(config::state_from(e, "base", model), config::state_from(e, "direction", model), cfg.order);
  const std::size_t n = e["n"].get<std::size_t>();
  const LineReport r = line_experiment(model, seg, n, db, cfg.classifier, cfg.order, pf);
  RunResult out;
  std::ostringstream csv;
  csv << kClassificationCsvHeader << '\n';
  for (std::size_t k = 0; k < r.points.size(); ++k) write_classification_row(csv, k, r.t_params[k], r.points[k]);
  out.files["points.csv"] = csv.str();
  Json chain = Json::array();
  for (std::size_t id : r.limit_chain) {
    chain.push_back(Json{{"id", id}, {"stability", stability_name(db[id].stability)}, {"state", to_json(db[id].state)}});
  }
  std::size_t unstable_points = 0;
  for (const TrajectoryClass& c : r.points) {
    if (c.tag == Tag::Convergent && c.equilibrium_id && db[*c.equilibrium_id].stability == Stability::LinearlyUnstable) {
      ++unstable_points;
    }
  }
  out.summary = Json{{"n", n},
                     {"points", r.points.size()},
                     {"masses", masses_json(r.masses)},
                     {"limit_chain", chain},
                     {"chain_ordered", r.chain_ordered},
                     {"unstable_hits", r.unstable_hits},
                     {"unstable_mass", static_cast<double>(unstable_points) / static_cast<double>(r.points.size())}};
  out.violations = r.chain_ordered ? 0 : 1;
  return out;
}

inline std::vector<std::size_t> unstable_ids(const EquilibriumDB& db) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db[i].stability == Stability::LinearlyUnstable) ids.push_back(i);
  }
  return ids;
}

inline RunResult run_basin(const ExperimentConfig& cfg, EquilibriumDB& db, const ParallelFor& pf) {
  const Json& e = cfg.resolved["experiment"];
  const Model& model = *cfg.model;
  const SamplerSpec spec = config::sampler(e["sampler"], "experiment.sampler", model.layout().species);
  const auto w = config::w_level(e);
  const std::size_t trials = e["trials"].get<std::size_t>();
  std::vector<std::size_t> targets;
  if (e["targets"].is_string()) {
    targets = unstable_ids(db);
  } else {
    for (const Json& id : e["targets"]) {
      if (!id.is_number_integer() || id.get<long long>() < 0 || id.get<std::size_t>() >= db.size()) {
        throw ConfigError("experiment.targets", "unknown equilibrium id " + id.dump());
      }
      if (db[id.get<std::size_t>()].stability != Stability::LinearlyUnstable) {
        throw ConfigError("experiment.targets", "equilibrium " + id.dump() + " is not linearly unstable");
      }
      targets.push_back(id.get<std::size_t>());
    }
  }
  RunResult out;
  std::ostringstream csv;
  csv << "target,trial,found\n";
  Json per = Json::array();
  for (std::size_t target : targets) {
    const BasinReport r =
        basin_unordered_check(model, target, trials, spec, w, cfg.seed, db, cfg.classifier, cfg.order, pf);
    std::set<std::size_t> hit(r.witnesses.begin(), r.witnesses.end());
    for (std::size_t i = 0; i < trials; ++i) csv << target << ',' << i << ',' << (hit.count(i) ? 1 : 0) << '\n';
    per.push_back(Json{{"target", target},
                       {"pairs_tested", r.pairs_tested},
                       {"ordered_pairs_found", r.ordered_pairs_found},
                       {"witnesses", id_list(r.witnesses)}});
    out.violations += r.ordered_pairs_found;
  }
  out.files["trials.csv"] = csv.str();
  out.summary = Json{{"targets", per}};
  return out;
}

inline RunResult run_homogeneity(const ExperimentConfig& cfg, EquilibriumDB& db, const ParallelFor& pf) {
  const Json& e = cfg.resolved["experiment"];
  const auto& model = dynamic_cast<const RDModel&>(*cfg.model);
  const std::size_t species = model.species();
  const SamplerSpec spec = config::sampler(e["sampler"], "experiment.sampler", species);
  const Box rbox = config::box(e["reaction_box"], species, "experiment.reaction_box");
  const double eps_unif = e["eps_unif"].get<double>();
  const HomogeneityReport r = homogeneity_experiment(model, spec, rbox, e["trials"].get<std::size_t>(), cfg.seed, db,
                                                     cfg.classifier, cfg.order, eps_unif, pf);
  RunResult out;
  std::ostringstream csv;
  csv << "index,tag,equilibrium_id,distance,horizon,uniform,blowup";
  for (std::size_t s = 0; s < species; ++s) csv << ",variation_" << s;
  csv << '\n';
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const HomogeneityTrial& t = r.trials[i];
    csv << i << ',' << tag_name(t.klass.tag) << ',' << csv_id(t.klass.equilibrium_id) << ','
        << format_double(t.klass.evidence.distance) << ',' << format_double(t.klass.evidence.horizon) << ','
        << (t.uniform ? 1 : 0) << ',' << (t.blowup ? 1 : 0);
    for (std::size_t s = 0; s < species; ++s) {
      csv << ',' << (t.final_variation.empty() ? std::string() : format_double(t.final_variation[s]));
    }
    csv << '\n';
  }
  out.files["trials.csv"] = csv.str();
  std::map<std::size_t, std::size_t> limits;
  for (const HomogeneityTrial& t : r.trials) {
    if (t.klass.tag == Tag::Convergent && t.klass.equilibrium_id) ++limits[*t.klass.equilibrium_id];
  }
  Json lj = Json::array();
  for (const auto& [id, n] : limits) {
    lj.push_back(Json{{"id", id}, {"trials", n}, {"spatial_variation", model.spatial_variation(db[id].state)}});
  }
  out.summary = Json{{"trials", r.trials.size()},
                     {"fraction_uniform", r.fraction_uniform},
                     {"nonuniform_limits", r.nonuniform_limits},
                     {"undetermined", r.undetermined},
                     {"blowups", r.blowups},
                     {"eps_unif", eps_unif},
                     {"limits", lj},
                     {"cooperativity", cooperativity_json(r.cooperativity)}};
  out.violations = r.nonuniform_limits;
  return out;
}

inline RunResult run_properties(const ExperimentConfig& cfg, EquilibriumDB& db, const ParallelFor& pf) {
  const Json& e = cfg.resolved["experiment"];
  const Model& model = *cfg.model;
  const ClassifierParams& p = cfg.classifier;
  const SamplerSpec spec = config::sampler(e["sampler"], "experiment.sampler", model.layout().species);
  const auto wl = config::w_level(e);
  const std::size_t pairs = e["pairs"].get<std::size_t>();
  const std::size_t lsd_pairs = e["lsd_pairs"].get<std::size_t>();
  const std::vector<double> times = e["monotone_times"].get<std::vector<double>>();
  const double cc_horizon = e["cc_horizon"].get<double>();

  std::vector<StateVec> xs, ys;
  for (std::size_t i = 0; i < pairs; ++i) {
    Rng rng = Rng::substream(cfg.seed, i);
    StateVec x = sample_initial(model, spec, rng);
    const StateVec w = sample_positive(model, wl, cfg.order, rng);
    ys.emplace_back(x.values() + w.values(), x.layout());
    xs.push_back(std::move(x));
  }

  RunResult out;
  std::ostringstream csv;
  csv << "check,index,verdict,value\n";
  Json summary;

  if (const auto* rd = dynamic_cast<const RDModel*>(&model)) {
    const CooperativityReport coop = check_cooperative_irreducible(rd->reaction(), reaction_box_for(spec), 1000, cfg.seed);
    summary["cooperativity"] = cooperativity_json(coop);
  } else if (const auto* net = dynamic_cast<const NetworkModel*>(&model)) {
    const CooperativityReport coop = check_cooperative_irreducible(net->field(), reaction_box_for(spec), 1000, cfg.seed);
    summary["cooperativity"] = cooperativity_json(coop);
  }

  // Monotonicity of the flow on ordered pairs.
  std::vector<MonotoneReport> mono(pairs);
  pf(pairs, [&](std::size_t i) { mono[i] = check_monotone(model, xs[i], ys[i], cfg.order, times, p.integrator, p.tol_order); });
  std::size_t mono_viol = 0, mono_incomplete = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pairs; ++i) {
    double margin = std::numeric_limits<double>::infinity();
    for (const MonotoneSample& s : mono[i].samples) margin = std::min(margin, s.margin);
    if (!mono[i].completed) {
      ++mono_incomplete;
      csv << "monotone," << i << ",incomplete,\n";
      continue;
    }
    worst_margin = std::min(worst_margin, margin);
    const bool ok = mono[i].violations.empty();
    mono_viol += ok ? 0 : 1;
    csv << "monotone," << i << ',' << (ok ? "ok" : "violation") << ',' << format_double(margin) << '\n';
  }
  summary["monotone"] = Json{{"pairs", pairs},
                             {"violations", mono_viol},
                             {"incomplete", mono_incomplete},
                             {"min_margin", worst_margin},
                             {"times", times}};

  // Limit set dichotomy on the first lsd_pairs pairs.
  std::vector<StateVec> lsd_inputs;
  for (std::size_t i = 0; i < lsd_pairs; ++i) {
    lsd_inputs.push_back(xs[i]);
    lsd_inputs.push_back(ys[i]);
  }
  std::vector<Classification> lsd_cls = classify_all(model, lsd_inputs, db, p, cfg.order, pf);
  std::size_t lsd_viol = 0, lsd_na = 0;
  std::array<std::size_t, 4> lsd_counts{};
  std::vector<const OmegaEstimate*> omegas;
  for (std::size_t i = 0; i < lsd_pairs; ++i) {
    const LsdReport r = judge_lsd(lsd_cls[2 * i], lsd_cls[2 * i + 1], p, cfg.order);
    ++lsd_counts[static_cast<std::size_t>(r.verdict)];
    if (r.verdict == LsdVerdict::Violation) ++lsd_viol;
    if (r.verdict == LsdVerdict::NotApplicable) ++lsd_na;
    csv << "lsd," << i << ',' << lsd_verdict_name(r.verdict) << ",\n";
  }
  for (const Classification& c : lsd_cls) {
    if (c.omega.valid) omegas.push_back(&c.omega);
  }
  summary["lsd"] = Json{{"pairs", lsd_pairs},
                        {"violations", lsd_viol},
                        {"ordered_limits", lsd_counts[static_cast<std::size_t>(LsdVerdict::OrderedLimits)]},
                        {"same_equilibrium", lsd_counts[static_cast<std::size_t>(LsdVerdict::SameEquilibrium)]},
                        {"not_applicable", lsd_na}};

  // Convergence criterion on every sampled point.
  std::vector<StateVec> cc_points;
  for (std::size_t i = 0; i < pairs; ++i) {
    cc_points.push_back(xs[i]);
    cc_points.push_back(ys[i]);
  }
  std::vector<int> dirs(cc_points.size());
  pf(cc_points.size(), [&](std::size_t i) { dirs[i] = convergence_criterion_direction(model, cc_points[i], cc_horizon, p, cfg.order); });
  std::vector<StateVec> applicable;
  std::vector<std::size_t> applicable_idx;
  for (std::size_t i = 0; i < cc_points.size(); ++i) {
    if (dirs[i] == 0) continue;
    applicable.push_back(cc_points[i]);
    applicable_idx.push_back(i);
  }
  std::vector<Classification> cc_cls = classify_all(model, applicable, db, p, cfg.order, pf);
  std::size_t cc_viol = 0;
  for (std::size_t k = 0; k < applicable.size(); ++k) {
    const bool ok = cc_cls[k].klass.tag == Tag::Convergent;
    cc_viol += ok ? 0 : 1;
    csv << "convergence_criterion," << applicable_idx[k] << ',' << (ok ? "ok" : "violation") << ','
        << (dirs[applicable_idx[k]] > 0 ? "increasing" : "decreasing") << '\n';
    if (cc_cls[k].omega.valid) omegas.push_back(&cc_cls[k].omega);
  }
  summary["convergence_criterion"] =
      Json{{"points", cc_points.size()}, {"applicable", applicable.size()}, {"violations", cc_viol}, {"horizon", cc_horizon}};

  // Nonordering of every omega estimate computed above.
  std::size_t no_viol = 0;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (!check_nonordering(*omegas[k], cfg.order, p.tol_order, p.eps_conv)) {
      ++no_viol;
      csv << "nonordering," << k << ",violation,\n";
    }
  }
  summary["nonordering"] = Json{{"omegas", omegas.size()}, {"violations", no_viol}};

  // Unordered basins of the unstable equilibria.
  const std::size_t basin_trials = e["basin_trials"].get<std::size_t>();
  Json basins = Json::array();
  std::size_t basin_viol = 0;
  if (basin_trials > 0) {
    for (std::size_t target : unstable_ids(db)) {
      const std::uint64_t bseed = mix_seed(cfg.seed ^ (0xba5eULL + target));
      const BasinReport r = basin_unordered_check(model, target, basin_trials, spec, wl, bseed, db, p, cfg.order, pf);
      basin_viol += r.ordered_pairs_found;
      csv << "basin," << target << ',' << (r.ordered_pairs_found == 0 ? "ok" : "violation") << ','
          << r.ordered_pairs_found << '\n';
      basins.push_back(Json{{"target", target}, {"pairs_tested", r.pairs_tested}, {"ordered_pairs_found", r.ordered_pairs_found}});
    }
  }
  summary["basin"] = basins;

  out.violations = mono_viol + lsd_viol + cc_viol + no_viol + basin_viol;
  summary["violations"] = out.violations;
  out.files["trials.csv"] = csv.str();
  out.summary = std::move(summary);
  return out;
}

}  // namespace detail

/// Runs the configured experiment. Output is independent of `parallel_for`.
inline RunResult run_experiment(const ExperimentConfig& cfg, const ParallelFor& parallel_for = serial_for) {
  EquilibriumDB db = equilibrium_sweep(*cfg.model, cfg.sweep, cfg.order);
  const std::size_t swept = db.size();
  RunResult r;
  if (cfg.experiment == "line") {
    r = detail::run_line(cfg, db, parallel_for);
  } else if (cfg.experiment == "basin") {
    r = detail::run_basin(cfg, db, parallel_for);
  } else if (cfg.experiment == "homogeneity") {
    r = detail::run_homogeneity(cfg, db, parallel_for);
  } else if (cfg.experiment == "properties") {
    r = detail::run_properties(cfg, db, parallel_for);
  } else {
    std::size_t counts[3] = {0, 0, 0};
    for (const EquilibriumRecord& rec : db.records()) ++counts[static_cast<int>(rec.stability)];
    r.summary = Json{{"linearly_stable", counts[0]}, {"neutrally_stable", counts[1]}, {"linearly_unstable", counts[2]}};
  }
  Json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["experiment"] = cfg.experiment;
  summary["model"] = cfg.model->description();
  summary["status"] = r.violations == 0 ? "ok" : "violations";
  summary["violations"] = r.violations;
  summary["equilibria"] = Json{{"from_sweep", swept}, {"total", db.size()}};
  summary["results"] = std::move(r.summary);
  summary["config"] = cfg.resolved;
  r.summary = std::move(summary);
  r.files["summary.json"] = to_json_text(r.summary);
  r.files["equilibria.json"] = to_json_text(to_json(db));
  return r;
}

inline void write_outputs(const std::filesystem::path& dir, const RunResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir", "cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& [name, content] : r.files) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    if (!out) throw ConfigError("output_dir", "cannot write '" + (dir / name).string() + "'");
  }
}

}  // namespace monolab
