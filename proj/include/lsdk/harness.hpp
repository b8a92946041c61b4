#ifndef LSDK_HARNESS_HPP
#define LSDK_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsdk/core.hpp"
#include "lsdk/solver.hpp"

namespace lsdk::harness {

enum class Problem { Radon, Doping };
enum class Method { LSDK, SDK, LLK, LK, CGNE };

std::string to_string(Problem p);
std::string to_string(Method m);

struct PhiSpec {
  RelaxationFunction::Kind kind = RelaxationFunction::Kind::ClampedLinear;
  double a = 0.4;  // constant value, or scale
  double b = 2.0;  // cap (clamped only)
  /// Constant relaxation resolved to 1/M² once M is known.
  bool auto_constant = false;
};

/// Fully validated experiment description; every field carries its
/// problem-specific default after parse_config.
struct ExperimentConfig {
  Problem problem = Problem::Radon;
  Method variant = Method::LSDK;
  PhiSpec phi;
  double tau = 2.0;
  double eta = 0.0;
  double noise_rel = 0.04;
  std::uint64_t seed = 1;
  std::size_t max_cycles = 1000;
  std::size_t cgne_cycles = 20;
  std::optional<double> residual_tol;
  std::optional<double> norm_bound;
  double norm_margin = 1.0;
  std::string output_dir;

  // radon
  std::size_t grid = 120;
  std::size_t n_detectors = 50;
  std::size_t n_t = 0;      // 0: 2 · grid
  std::size_t n_sigma = 0;  // 0: 4 · n_t
  std::size_t refinement = 2;
  std::string phantom;

  // doping
  std::size_t m = 31;
  double mu_n = 1.0;
  double bump_h = 1.0 / 32.0;
  double x_min = 0.1;
  double x_max = 10.0;
  bool clamp = true;
  std::string truth;
  std::string initial;
};

/// `key = value` lines with `#` comments. Throws ConfigError citing the
/// offending line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct BuiltProblem {
  ProblemSystem system;
  ParameterVector x0;
  double norm_bound = 1.0;
  std::vector<DataBlock> exact_data;
};

BuiltProblem build_problem(const ExperimentConfig& config);
SolverConfig make_solver_config(const ExperimentConfig& config, const BuiltProblem& problem);

struct ExperimentSummary {
  Method variant = Method::LSDK;
  std::size_t cycles = 0;
  std::size_t total_updates = 0;
  std::size_t forward_evals = 0;
  std::size_t adjoint_evals = 0;
  std::optional<double> final_error;
  std::optional<double> min_error;
  std::size_t min_error_cycle = 0;
  double max_discrepancy_ratio = 0.0;
  double max_residual = 0.0;
  std::string stop_reason;
  double alpha_min = 0.0;
  double norm_bound = 0.0;
  std::size_t step_bound_violations = 0;
  std::size_t alpha_floor_violations = 0;
  double runtime_seconds = 0.0;
};

struct ExperimentResult {
  ExperimentSummary summary;
  ParameterVector x_final;
  std::optional<ParameterVector> truth;
  IterationTrace trace;            // empty for CGNE
  std::vector<double> cgne_errors;  // CGNE only
  std::vector<std::size_t> per_cycle_updates;
  std::vector<double> final_residuals;
  std::vector<double> noise_levels;
};

/// Runs without touching the filesystem.
ExperimentResult execute(const ExperimentConfig& config);
ExperimentResult execute(const ExperimentConfig& config, const BuiltProblem& problem);

/// Runs and writes trace.csv, cycles.csv, summary.txt, recon.pgm and
/// truth.pgm into `output_dir`; partial artifacts are removed on failure.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_dir);

// Artifact formats ---------------------------------------------------------

/// Shortest round-trip decimal, locale independent.
std::string format_real(double v);

void write_trace_csv(const IterationTrace& trace, std::size_t n_equations, const std::filesystem::path& path);
void write_cycles_csv(const std::vector<std::size_t>& per_cycle_updates, const std::filesystem::path& path);
std::string summary_text(const ExperimentSummary& s);

struct PgmImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> pixels;
  double min = 0.0;
  double max = 0.0;
};

/// ASCII P2, 8 bit, linear min-max scaling truncated to integers; the
/// scale survives in a `# min=<v> max=<v>` comment.
PgmImage encode_pgm(const ParameterVector& field);
void write_pgm(const ParameterVector& field, const std::filesystem::path& path);
PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace lsdk::harness

#endif  // LSDK_HARNESS_HPP
