// monolab: run configured experiments or list the built-in fixtures.
//
//   monolab run <config.json> [--seed N] [--out-dir DIR] [--threads N] [--override key=value]...
//   monolab fixtures
//
// Exit status: 0 on success, 2 when a property check reports violations,
// 1 on configuration or I/O errors.

#include "monolab/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag) return std::max<std::size_t>(1, *flag);
  if (const char* env = std::getenv("MONOLAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "monolab: ignoring invalid MONOLAB_THREADS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments on monotone dynamical systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Path to the experiment config")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out-dir", out_dir, "Override the output directory");
  run->add_option("--threads", threads, "Worker threads (default: MONOLAB_THREADS or 1)");
  run->add_option("--override", overrides, "Dot-path override, e.g. classifier.t_burn=80");

  CLI::App* fixtures = app.add_subcommand("fixtures", "List the built-in models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (fixtures->parsed()) {
    for (const monolab::FixtureInfo& f : monolab::list_fixtures()) {
      std::cout << f.id << "\t" << f.description << "\t(acceptance criteria " << f.criteria << ")\n";
    }
    return 0;
  }

  try {
    const monolab::ExperimentConfig cfg = monolab::load_config_file(config_path, overrides, seed, out_dir);
    const monolab::WorkerPool pool(resolve_threads(threads));
    const monolab::RunResult result = monolab::run_experiment(cfg, pool.as_parallel_for());
    monolab::write_outputs(cfg.output_dir, result);
    std::cout << cfg.experiment << ": " << result.summary["status"].get<std::string>() << " ("
              << result.violations << " violations); outputs in " << cfg.output_dir.string() << "\n";
    return result.violations == 0 ? 0 : 2;
  } catch (const monolab::ConfigError& e) {
    std::cerr << "monolab: config error: " << e.what() << "\n";
    return 1;
  } catch (const monolab::ParseError& e) {
    std::cerr << "monolab: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "monolab: " << e.what() << "\n";
    return 1;
  }
}
