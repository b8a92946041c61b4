#include "lsdk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsdk {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::LSDK: return "lsdk";
    case Variant::SDK: return "sdk";
    case Variant::LLK: return "llk";
    case Variant::LK: return "lk";
  }
  return "?";
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::AllLoped: return "all-loped";
    case StopReason::MaxCycles: return "max-cycles";
    case StopReason::ExactDataTol: return "exact-data-tol";
    case StopReason::Degenerate: return "degenerate";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(eta >= 0.0 && eta < 0.5)) throw ConfigError("eta must lie in [0, 1/2)");
  if (!(norm_bound > 0.0) || !std::isfinite(norm_bound)) {
    throw ConfigError("operator norm bound M must be positive");
  }
  const double tau_min = linear_system ? 2.0 : 2.0 * (1.0 + eta) / (1.0 - 2.0 * eta);
  if (!(tau >= tau_min)) {
    std::ostringstream msg;
    msg << "tau = " << tau << " violates tau >= 2(1+eta)/(1-2eta) = " << tau_min;
    throw ConfigError(msg.str());
  }
  if ((variant == Variant::LLK || variant == Variant::LK) &&
      phi.kind() != RelaxationFunction::Kind::Constant) {
    throw ConfigError("Landweber-Kaczmarz variants require a constant relaxation function");
  }
  if (max_cycles == 0) throw ConfigError("max_cycles must be at least 1");
  if (exact_data_residual_tol && !(*exact_data_residual_tol >= 0.0)) {
    throw ConfigError("exact_data_residual_tol must be >= 0");
  }
  if (clamp_bounds && !(clamp_bounds->first < clamp_bounds->second)) {
    throw ConfigError("clamp bounds must satisfy x_min < x_max");
  }
}

std::size_t IterationTrace::total_updates() const {
  std::size_t total = 0;
  for (std::size_t u : per_cycle_updates) total += u;
  return total;
}

int loping_weight(double residual_norm, double tau, double delta_i) {
  return residual_norm >= tau * delta_i ? 1 : 0;
}

double relaxation_alpha(const RelaxationFunction& phi, double curvature_ratio, int omega,
                        double alpha_min) {
  return omega == 1 ? phi(curvature_ratio) : alpha_min;
}

namespace {

struct Direction {
  ParameterVector s;
  double s_norm_sq = 0.0;
  double curvature_ratio = 0.0;
};

// s = F'(x)* r and, optionally, ‖s‖²/‖F'(x)s‖². Requires residual_norm > 0.
Direction descent_direction(const OperatorBlock& block, const ParameterVector& x,
                            const DataBlock& residual, double residual_norm,
                            const StepOptions& options, std::size_t& derivative_evals) {
  Direction d{block.adjoint_derivative_apply(x, residual)};
  d.s_norm_sq = inner_product(d.s, d.s);
  const double floor = options.step_floor.value_or(1e-14 * residual_norm * block.norm_bound);
  if (std::sqrt(d.s_norm_sq) < floor || d.s_norm_sq == 0.0) {
    std::ostringstream msg;
    msg << "descent direction vanished (|s| = " << std::sqrt(d.s_norm_sq)
        << ") while the residual " << residual_norm << " is above threshold";
    throw DegenerateStepError(msg.str());
  }
  if (options.need_curvature) {
    const DataBlock fs = block.derivative_apply(x, d.s);
    ++derivative_evals;
    const double fs_norm_sq = inner_product(fs, fs);
    if (fs_norm_sq == 0.0) {
      throw DegenerateCurvatureError("F'(x) annihilates the descent direction");
    }
    d.curvature_ratio = d.s_norm_sq / fs_norm_sq;
  }
  return d;
}

}  // namespace

StepData compute_step(const OperatorBlock& block, const ParameterVector& x, const DataBlock& y_delta,
                      const StepOptions& options) {
  StepData out;
  out.residual = block.apply(x) - y_delta;
  out.residual_norm = norm(out.residual);
  if (out.residual_norm == 0.0) {
    out.s = x.zeros_like();
    return out;
  }
  std::size_t derivative_evals = 0;
  Direction d = descent_direction(block, x, out.residual, out.residual_norm, options, derivative_evals);
  out.s = std::move(d.s);
  out.curvature_ratio = d.curvature_ratio;
  return out;
}

SolveResult run(const ProblemSystem& system, const SolverConfig& config, const ParameterVector& x0) {
  system.validate();
  config.validate();
  if (!x0.all_finite()) throw DomainError("initial guess has non-finite entries");

  const std::size_t n = system.size();
  const bool loping = config.loping() && !system.exact_data();
  const double alpha_min = config.alpha_min();
  const StepOptions step_options{config.phi.kind() != RelaxationFunction::Kind::Constant,
                                 config.step_floor};

  SolveResult result{x0, {}};
  ParameterVector& x = result.x_final;
  IterationTrace& trace = result.trace;
  trace.alpha_min = alpha_min;

  std::optional<double> truth_norm;
  if (system.exact_solution) {
    const double tn = norm(*system.exact_solution);
    if (tn > 0.0) truth_norm = tn;
  }

  double residual_tol = 0.0;
  if (!loping) {
    if (config.exact_data_residual_tol) {
      residual_tol = *config.exact_data_residual_tol;
    } else {
      double initial = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        initial = std::max(initial, norm(system.blocks[i].apply(x) - system.noisy_data[i]));
        ++trace.forward_evals;
      }
      residual_tol = 1e-8 * initial;
    }
  }

  trace.stop_reason = StopReason::MaxCycles;
  for (std::size_t cycle = 0; cycle < config.max_cycles; ++cycle) {
    std::size_t updates = 0;
    double cycle_max_residual = 0.0;
    bool degenerate = false;

    for (std::size_t i = 0; i < n; ++i) {
      const OperatorBlock& block = system.blocks[i];
      StepRecord rec;
      rec.k = cycle * n + i;
      rec.op_index = i;
      if (truth_norm) rec.error_rel = norm(x - *system.exact_solution) / *truth_norm;

      const DataBlock residual = block.apply(x) - system.noisy_data[i];
      ++trace.forward_evals;
      rec.residual_norm = norm(residual);
      cycle_max_residual = std::max(cycle_max_residual, rec.residual_norm);
      rec.omega = loping ? loping_weight(rec.residual_norm, config.tau, system.noise_levels[i]) : 1;

      if (rec.omega == 0) {
        rec.alpha = alpha_min;
        trace.steps.push_back(rec);
        continue;
      }

      ++updates;
      if (rec.residual_norm == 0.0) {
        // Zero residual: F'(x)* 0 = 0, the step is trivially stationary.
        ++trace.adjoint_evals;
        rec.alpha = alpha_min;
        rec.step_norm = 0.0;
        trace.steps.push_back(rec);
        continue;
      }

      Direction d;
      try {
        ++trace.adjoint_evals;
        d = descent_direction(block, x, residual, rec.residual_norm, step_options,
                              trace.derivative_evals);
      } catch (const DegenerateStepError&) {
        if (!config.stop_on_degenerate) throw;
        degenerate = true;
        --updates;
        rec.alpha = alpha_min;
        trace.steps.push_back(rec);
        break;
      }

      rec.alpha = step_options.need_curvature ? relaxation_alpha(config.phi, d.curvature_ratio, 1, alpha_min)
                                              : config.phi.scale();
      rec.step_norm = std::sqrt(d.s_norm_sq);

      if (rec.alpha * d.s_norm_sq > rec.residual_norm * rec.residual_norm * (1.0 + 1e-12)) {
        ++trace.step_bound_violations;
      }
      if (rec.alpha < alpha_min) ++trace.alpha_floor_violations;

      x.axpy(-rec.alpha, d.s);
      if (config.clamp_bounds) {
        const auto [lo, hi] = *config.clamp_bounds;
        for (double& v : x.values()) v = std::clamp(v, lo, hi);
      }
      if (!x.all_finite()) {
        throw DivergenceError("iterate became non-finite at step " + std::to_string(rec.k), rec.k);
      }
      trace.steps.push_back(rec);
    }

    trace.per_cycle_updates.push_back(updates);
    if (degenerate) {
      trace.stop_reason = StopReason::Degenerate;
      trace.stop_index = trace.steps.back().k;
      return result;
    }
    if (loping && updates == 0) {
      trace.stop_reason = StopReason::AllLoped;
      trace.stop_index = cycle * n;
      return result;
    }
    if (!loping && cycle_max_residual <= residual_tol) {
      trace.stop_reason = StopReason::ExactDataTol;
      trace.stop_index = (cycle + 1) * n;
      return result;
    }
  }
  return result;
}

CgneResult cgne_run(const ProblemSystem& system, const ParameterVector& x0, std::size_t cycles) {
  system.validate();
  if (!system.all_linear()) {
    throw UnsupportedVariantError("CGNE requires every operator block to be linear");
  }
  if (cycles == 0) throw ConfigError("CGNE needs at least one cycle");

  const std::size_t n = system.size();
  CgneResult out{x0, x0, 0, {}, {}};
  ParameterVector& x = out.x_final;

  std::optional<double> truth_norm;
  if (system.exact_solution && norm(*system.exact_solution) > 0.0) {
    truth_norm = norm(*system.exact_solution);
  }
  auto record = [&](const std::vector<DataBlock>& r) {
    double res_sq = 0.0;
    for (const auto& ri : r) res_sq += inner_product(ri, ri);
    out.per_cycle_residual.push_back(std::sqrt(res_sq));
    if (truth_norm) {
      const double e = norm(x - *system.exact_solution) / *truth_norm;
      out.per_cycle_error.push_back(e);
      if (e < out.per_cycle_error[out.best_cycle]) {
        out.best_cycle = out.per_cycle_error.size() - 1;
        out.x_best = x;
      }
    }
  };

  // Residuals r = y - F x, gradient d = F* r over the stacked system.
  std::vector<DataBlock> r;
  r.reserve(n);
  for (std::size_t i = 0; i < n; ++i) r.push_back(system.noisy_data[i] - system.blocks[i].apply(x));
  auto normal_residual = [&] {
    ParameterVector d = x.zeros_like();
    for (std::size_t i = 0; i < n; ++i) d.axpy(1.0, system.blocks[i].adjoint_derivative_apply(x, r[i]));
    return d;
  };
  record(r);

  ParameterVector d = normal_residual();
  ParameterVector p = d;
  double gamma = inner_product(d, d);
  for (std::size_t c = 0; c < cycles && gamma > 0.0; ++c) {
    std::vector<DataBlock> q;
    q.reserve(n);
    double q_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      q.push_back(system.blocks[i].derivative_apply(x, p));
      q_sq += inner_product(q.back(), q.back());
    }
    if (q_sq == 0.0) break;
    const double a = gamma / q_sq;
    x.axpy(a, p);
    for (std::size_t i = 0; i < n; ++i) r[i].axpy(-a, q[i]);
    record(r);

    d = normal_residual();
    const double gamma_next = inner_product(d, d);
    p.scale(gamma_next / gamma);
    p.axpy(1.0, d);
    gamma = gamma_next;
  }
  if (!truth_norm) out.x_best = x;
  return out;
}

}  // namespace lsdk
