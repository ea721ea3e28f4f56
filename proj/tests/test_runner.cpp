#include "monolab/runner.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace monolab;

namespace {

Json line_config(std::size_t n) {
  return Json{{"schema_version", 1},
              {"model", {{"fixture", "tanh2"}}},
              {"experiment", {{"type", "line"}, {"base", {-3.0, -3.0}}, {"direction", {6.0, 6.0}}, {"n", n}}},
              {"seed", 7}};
}

std::string field_of(const Json& doc, const std::vector<std::string>& overrides = {}) {
  try {
    load_config(doc, overrides);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(Format, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.33333333333333331");
  EXPECT_EQ(format_double(-2.5e-300), "-2.5e-300");
  EXPECT_EQ(std::stod(format_double(std::exp(1.0))), std::exp(1.0));
}

TEST(Format, JsonTextUsesNullForNonFinite) {
  const Json j{{"a", 0.1}, {"b", std::numeric_limits<double>::infinity()}, {"c", std::nan("")}, {"d", {1, 2}}};
  const std::string text = to_json_text(j);
  EXPECT_NE(text.find("\"a\": 0.10000000000000001"), std::string::npos);
  EXPECT_NE(text.find("\"b\": null"), std::string::npos);
  EXPECT_NE(text.find("\"c\": null"), std::string::npos);
  EXPECT_NE(text.find("\"d\": [1, 2]"), std::string::npos);
  EXPECT_FALSE(Json::parse(text).is_null());
}

TEST(Config, DefaultsAreFilledAndEchoed) {
  const ExperimentConfig cfg = load_config(line_config(10));
  EXPECT_EQ(cfg.experiment, "line");
  EXPECT_EQ(cfg.model_name, "tanh2");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.resolved["schema_version"], kSchemaVersion);
  EXPECT_EQ(cfg.resolved["integrator"]["scheme"], "rk54");
  EXPECT_EQ(cfg.resolved["order"]["signs"], Json::array({1, 1}));
  EXPECT_EQ(cfg.resolved["classifier"]["t_burn"], 50.0);
  EXPECT_EQ(cfg.resolved["experiment"]["n"], 10);
  EXPECT_EQ(cfg.classifier.integrator.scheme, Scheme::AdaptiveRK54);
}

TEST(Config, ReactionDiffusionDefaultsToImex) {
  const Json doc{{"model", {{"fixture", "chafee"}}}, {"experiment", {{"type", "equilibria"}}}};
  const ExperimentConfig cfg = load_config(doc);
  EXPECT_EQ(cfg.classifier.integrator.scheme, Scheme::ImexCnHeun);
  EXPECT_EQ(cfg.resolved["integrator"]["scheme"], "imex");
}

TEST(Config, ErrorsNameTheField) {
  Json doc = line_config(10);
  doc["model"]["fixture"] = "tanh3";
  EXPECT_EQ(field_of(doc), "model.fixture");

  doc = line_config(10);
  doc["integrator"] = Json{{"rel_tol", -1.0}};
  EXPECT_EQ(field_of(doc), "integrator.rel_tol");

  doc = line_config(10);
  doc["classifier"] = Json{{"t_brun", 10.0}};
  EXPECT_EQ(field_of(doc), "classifier.t_brun");

  doc = line_config(10);
  doc["bogus"] = 1;
  EXPECT_EQ(field_of(doc), "bogus");

  doc = line_config(10);
  doc["experiment"]["type"] = "sweep";
  EXPECT_EQ(field_of(doc), "experiment.type");

  doc = line_config(10);
  doc["experiment"].erase("type");
  EXPECT_EQ(field_of(doc), "experiment.type");

  doc = line_config(10);
  doc["experiment"]["direction"] = Json::array({1.0, -1.0});
  EXPECT_EQ(field_of(doc), "experiment.direction");

  doc = line_config(1);
  EXPECT_EQ(field_of(doc), "experiment.n");

  doc = line_config(10);
  doc["order"] = Json{{"signs", {1, 0}}};
  EXPECT_EQ(field_of(doc), "order.signs");

  doc = line_config(10);
  doc["schema_version"] = 2;
  EXPECT_EQ(field_of(doc), "schema_version");

  doc = line_config(10);
  doc["seed"] = -3;
  EXPECT_EQ(field_of(doc), "seed");

  const Json hom{{"model", {{"fixture", "tanh2"}}}, {"experiment", {{"type", "homogeneity"}}}};
  EXPECT_EQ(field_of(hom), "model");
}

TEST(Config, UnknownFixtureListsKnownOnes) {
  Json doc = line_config(10);
  doc["model"]["fixture"] = "nope";
  try {
    load_config(doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("tanh2"), std::string::npos);
    EXPECT_NE(msg.find("chafee"), std::string::npos);
    EXPECT_NE(msg.find("rd2"), std::string::npos);
  }
}

TEST(Config, CustomModels) {
  const Json net{{"model", {{"name", "pair"}, {"arity", 2}, {"reaction", "-u1 + u2; -u2 + u1"}}},
                 {"experiment", {{"type", "equilibria"}}}};
  const ExperimentConfig cfg = load_config(net);
  EXPECT_EQ(cfg.model_name, "pair");
  EXPECT_EQ(cfg.model->dim(), 2u);

  Json bad = net;
  bad["model"]["reaction"] = "-u1 +; u2";
  EXPECT_EQ(field_of(bad), "model.reaction");
}

TEST(Config, OverridesUseDotPaths) {
  const std::vector<std::string> ov{"experiment.n=25", "classifier.t_burn=80", "integrator.scheme=\"rk54\"",
                                    "experiment.base.1=-2.5", "output_dir=somewhere"};
  const ExperimentConfig cfg = load_config(line_config(10), ov, 99, std::nullopt);
  EXPECT_EQ(cfg.resolved["experiment"]["n"], 25);
  EXPECT_EQ(cfg.classifier.t_burn, 80.0);
  EXPECT_EQ(cfg.resolved["experiment"]["base"][1], -2.5);
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("somewhere"));
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.resolved["seed"], 99);

  const ExperimentConfig moved = load_config(line_config(10), {}, std::nullopt, std::string("elsewhere"));
  EXPECT_EQ(moved.output_dir, std::filesystem::path("elsewhere"));

  EXPECT_EQ(field_of(line_config(10), {"novalue"}), "--override");
  EXPECT_EQ(field_of(line_config(10), {"experiment..n=3"}), "experiment..n");
  EXPECT_EQ(field_of(line_config(10), {"experiment.base.7=1"}), "experiment.base.7");
  EXPECT_EQ(field_of(line_config(10), {"classifier.unknown=1"}), "classifier.unknown");
}

TEST(Config, FileLoading) {
  const auto dir = std::filesystem::temp_directory_path() / "monolab_runner_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << line_config(5).dump();
    std::ofstream(dir / "broken.json") << "{ \"model\": ";
  }
  EXPECT_EQ(load_config_file(dir / "ok.json").experiment, "line");
  EXPECT_THROW(load_config_file(dir / "broken.json"), ConfigError);
  EXPECT_THROW(load_config_file(dir / "missing.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Run, LineSummaryAndFiles) {
  const ExperimentConfig cfg = load_config(line_config(20));
  const RunResult r = run_experiment(cfg);
  EXPECT_EQ(r.violations, 0u);
  ASSERT_TRUE(r.files.count("summary.json"));
  ASSERT_TRUE(r.files.count("points.csv"));
  ASSERT_TRUE(r.files.count("equilibria.json"));
  const Json s = Json::parse(r.files.at("summary.json"));
  EXPECT_EQ(s["schema_version"], kSchemaVersion);
  EXPECT_EQ(s["status"], "ok");
  EXPECT_EQ(s["config"], cfg.resolved);
  EXPECT_EQ(s["results"]["points"], 21);
  EXPECT_EQ(s["results"]["limit_chain"].size(), 3u);
  EXPECT_TRUE(s["results"]["chain_ordered"].get<bool>());
  const std::string& csv = r.files.at("points.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kClassificationCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 22);
  const Json eq = Json::parse(r.files.at("equilibria.json"));
  EXPECT_EQ(eq.size(), 3u);
}

TEST(Run, EquilibriaCounts) {
  const Json doc{{"model", {{"fixture", "tanh2"}}}, {"experiment", {{"type", "equilibria"}}}};
  const RunResult r = run_experiment(load_config(doc));
  EXPECT_EQ(r.summary["results"]["linearly_stable"], 2);
  EXPECT_EQ(r.summary["results"]["linearly_unstable"], 1);
  EXPECT_EQ(r.summary["results"]["neutrally_stable"], 0);
}

TEST(Run, ThreadCountDoesNotChangeBytes) {
  Json doc{{"model", {{"fixture", "tanh2"}}},
           {"experiment",
            {{"type", "properties"}, {"pairs", 20}, {"lsd_pairs", 10}, {"basin_trials", 20},
             {"sampler", {{"c_range", {-3.0, 3.0}}}}}},
           {"seed", 5}};
  for (const Json& d : {line_config(40), doc}) {
    const ExperimentConfig cfg = load_config(d);
    const RunResult serial = run_experiment(cfg);
    const WorkerPool pool(4);
    const RunResult threaded = run_experiment(cfg, pool.as_parallel_for());
    ASSERT_EQ(serial.files.size(), threaded.files.size());
    for (const auto& [name, content] : serial.files) EXPECT_EQ(content, threaded.files.at(name)) << name;
  }
}

TEST(Run, WriteOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "monolab_runner_out";
  std::filesystem::remove_all(dir);
  const RunResult r = run_experiment(load_config(line_config(4)));
  write_outputs(dir, r);
  for (const auto& [name, content] : r.files) {
    std::ifstream in(dir / name, std::ios::binary);
    const std::string back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(back, content);
  }
  std::filesystem::remove_all(dir);
}
