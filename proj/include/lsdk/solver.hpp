#ifndef LSDK_SOLVER_HPP
#define LSDK_SOLVER_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lsdk/core.hpp"

namespace lsdk {

enum class Variant { LSDK, SDK, LLK, LK };

std::string to_string(Variant v);

struct SolverConfig {
  Variant variant = Variant::LSDK;
  double tau = 2.0;
  double eta = 0.0;
  double norm_bound = 1.0;
  RelaxationFunction phi = RelaxationFunction::clamped_linear(0.4, 2.0);
  std::size_t max_cycles = 1000;
  /// Absolute tolerance for the ω ≡ 1 regime. Unset: 1e-8 × the largest
  /// residual at x0.
  std::optional<double> exact_data_residual_tol;
  std::optional<std::pair<double, double>> clamp_bounds;
  /// Unset: 1e-14 · residual · M.
  std::optional<double> step_floor;
  /// Record Degenerate as the stop reason instead of throwing.
  bool stop_on_degenerate = false;
  /// Linear systems admit τ = 2 regardless of η.
  bool linear_system = false;

  double alpha_min() const { return phi(1.0 / (norm_bound * norm_bound)); }
  bool loping() const { return variant == Variant::LSDK || variant == Variant::LLK; }

  /// Throws ConfigError on a violated parameter constraint.
  void validate() const;
};

struct StepRecord {
  std::size_t k = 0;
  std::size_t op_index = 0;
  int omega = 0;
  double alpha = 0.0;
  double residual_norm = 0.0;
  std::optional<double> step_norm;
  std::optional<double> error_rel;
};

enum class StopReason { AllLoped, MaxCycles, ExactDataTol, Degenerate };

std::string to_string(StopReason r);

struct IterationTrace {
  std::vector<StepRecord> steps;
  std::vector<std::size_t> per_cycle_updates;
  std::size_t forward_evals = 0;
  std::size_t derivative_evals = 0;
  std::size_t adjoint_evals = 0;
  std::optional<std::size_t> stop_index;
  StopReason stop_reason = StopReason::MaxCycles;
  double alpha_min = 0.0;
  /// Steps with α‖s‖² > ‖r‖²(1 + 1e-12).
  std::size_t step_bound_violations = 0;
  /// Steps with α < α_min.
  std::size_t alpha_floor_violations = 0;

  std::size_t cycles() const { return per_cycle_updates.size(); }
  std::size_t total_updates() const;
};

struct SolveResult {
  ParameterVector x_final;
  IterationTrace trace;
};

/// 1 iff the residual reaches the discrepancy threshold τ·δ.
int loping_weight(double residual_norm, double tau, double delta_i);

struct StepData {
  DataBlock residual;
  double residual_norm = 0.0;
  ParameterVector s;
  double curvature_ratio = 0.0;
};

struct StepOptions {
  bool need_curvature = true;
  /// Unset: 1e-14 · residual · M.
  std::optional<double> step_floor;
};

/// Residual, descent direction and ‖s‖²/‖F′s‖² for one equation.
StepData compute_step(const OperatorBlock& block, const ParameterVector& x, const DataBlock& y_delta,
                      const StepOptions& options = {});

double relaxation_alpha(const RelaxationFunction& phi, double curvature_ratio, int omega,
                        double alpha_min);

SolveResult run(const ProblemSystem& system, const SolverConfig& config, const ParameterVector& x0);

struct CgneResult {
  ParameterVector x_final;
  ParameterVector x_best;
  std::size_t best_cycle = 0;
  /// Entry c is the relative error after c CG steps (entry 0: at x0).
  std::vector<double> per_cycle_error;
  std::vector<double> per_cycle_residual;
};

/// Conjugate gradients on the normal equations of the stacked system.
CgneResult cgne_run(const ProblemSystem& system, const ParameterVector& x0, std::size_t cycles);

}  // namespace lsdk

#endif  // LSDK_SOLVER_HPP
