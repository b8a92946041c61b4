// Command line front end: solve / validate / adjoint-check.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "lsdk/doping.hpp"
#include "lsdk/harness.hpp"
#include "lsdk/radon.hpp"

namespace fs = std::filesystem;
using namespace lsdk;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalFailure = 2;

fs::path default_output_dir() {
  if (const char* env = std::getenv("LSDK_OUTPUT_DIR"); env && *env) return env;
  return "lsdk_out";
}

int solve(const std::vector<std::string>& configs, std::size_t jobs, const std::string& output) {
  std::vector<harness::ExperimentConfig> parsed;
  try {
    for (const auto& path : configs) parsed.push_back(harness::load_config(path));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  std::vector<fs::path> outputs;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    fs::path base = !output.empty()                  ? fs::path(output)
                    : !parsed[i].output_dir.empty() ? fs::path(parsed[i].output_dir)
                                                    : default_output_dir();
    if (configs.size() > 1) base /= fs::path(configs[i]).stem();
    outputs.push_back(base);
  }

  std::mutex io;
  std::atomic<int> status{kOk};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < parsed.size(); i = next++) {
      try {
        const harness::ExperimentResult r = harness::run_experiment(parsed[i], outputs[i]);
        std::lock_guard lock(io);
        std::cout << "== " << configs[i] << " -> " << outputs[i].string() << '\n'
                  << harness::summary_text(r.summary);
      } catch (const ConfigError& e) {
        std::lock_guard lock(io);
        std::cerr << configs[i] << ": config error: " << e.what() << '\n';
        int expected = kOk;
        status.compare_exchange_strong(expected, kConfigError);
      } catch (const std::exception& e) {
        std::lock_guard lock(io);
        std::cerr << configs[i] << ": numerical failure: " << e.what() << '\n';
        status = kNumericalFailure;
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, parsed.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return status;
}

int validate(const std::string& path) {
  try {
    const harness::ExperimentConfig c = harness::load_config(path);
    std::cout << "ok: problem=" << harness::to_string(c.problem) << " variant=" << harness::to_string(c.variant)
              << " tau=" << harness::format_real(c.tau) << " noise_rel=" << harness::format_real(c.noise_rel)
              << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int adjoint_check(const std::string& problem, std::size_t grid) {
  try {
    std::vector<OperatorBlock> blocks;
    ParameterVector x;
    if (problem == "radon") {
      const std::size_t g = grid ? grid : 60;
      const auto det = radon::make_detectors(50, 2 * g, 8 * g);
      const radon::ImageGrid ig{g, g};
      for (std::size_t i = 0; i < det.size(); ++i) blocks.push_back(radon::make_radon_block(det, i, ig));
      x = ig.zeros();
    } else if (problem == "doping") {
      doping::DeviceGrid dg;
      dg.m = grid ? grid : 17;
      for (const auto& u : doping::make_voltage_profiles(dg, 11, 1.0 / 32.0)) {
        blocks.push_back(doping::make_doping_block(dg, u));
      }
      x = doping::default_true_profile(dg);
    } else {
      std::cerr << "unknown problem '" << problem << "'\n";
      return kConfigError;
    }
    bool all_pass = true;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const AdjointReport rep = validate_adjoint(blocks[i], x, 2, 1000 + i, blocks[i].adjoint_tolerance);
      std::cout << "block " << i << ": defect " << harness::format_real(rep.max_relative_defect)
                << (rep.pass ? "  pass" : "  FAIL") << '\n';
      all_pass = all_pass && rep.pass;
    }
    return all_pass ? kOk : kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loping steepest-descent Kaczmarz solvers for systems of ill-posed equations"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::size_t jobs = 1;
  std::string output;
  auto* solve_cmd = app.add_subcommand("solve", "Run experiments and write their artifacts");
  solve_cmd->add_option("--config", configs, "Experiment config file(s)")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--jobs", jobs, "Configs to run concurrently")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--output", output, "Output directory (default: config output_dir, $LSDK_OUTPUT_DIR, ./lsdk_out)");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate a config");
  validate_cmd->add_option("--config", validate_path, "Experiment config file")->required();

  std::string problem;
  std::size_t grid = 0;
  auto* adjoint_cmd = app.add_subcommand("adjoint-check", "Check discrete adjoint identities of every block");
  adjoint_cmd->add_option("--problem", problem, "radon | doping")->required()->check(CLI::IsMember({"radon", "doping"}));
  adjoint_cmd->add_option("--grid", grid, "Grid size (radon pixels per side / doping nodes per side)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  if (*solve_cmd) return solve(configs, jobs, output);
  if (*validate_cmd) return validate(validate_path);
  return adjoint_check(problem, grid);
}
