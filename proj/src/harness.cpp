#include "lsdk/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "lsdk/doping.hpp"
#include "lsdk/radon.hpp"

namespace lsdk::harness {

namespace fs = std::filesystem;

std::string to_string(Problem p) { return p == Problem::Radon ? "radon" : "doping"; }

std::string to_string(Method m) {
  switch (m) {
    case Method::LSDK: return "lsdk";
    case Method::SDK: return "sdk";
    case Method::LLK: return "llk";
    case Method::LK: return "lk";
    case Method::CGNE: return "cgne";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct LineError {
  std::size_t line;
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
  }
};

double parse_real(const std::string& v, const LineError& at) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    at.fail("malformed real '" + v + "'");
  }
  return out;
}

std::uint64_t parse_count(const std::string& v, const LineError& at) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) at.fail("malformed count '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const LineError& at) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  at.fail("malformed boolean '" + v + "'");
}

PhiSpec parse_phi(const std::string& v, const LineError& at) {
  std::istringstream in(v);
  std::string kind;
  in >> kind;
  std::vector<std::string> args;
  for (std::string a; in >> a;) args.push_back(a);
  PhiSpec phi;
  if (kind == "const" || kind == "constant") {
    if (args.size() != 1) at.fail("phi = const <alpha> | const auto");
    phi.kind = RelaxationFunction::Kind::Constant;
    if (args[0] == "auto") {
      phi.auto_constant = true;
    } else {
      phi.a = parse_real(args[0], at);
      if (!(phi.a > 0)) at.fail("constant relaxation must be positive");
    }
  } else if (kind == "clamped") {
    if (args.size() != 2) at.fail("phi = clamped <scale> <cap>");
    phi.kind = RelaxationFunction::Kind::ClampedLinear;
    phi.a = parse_real(args[0], at);
    phi.b = parse_real(args[1], at);
    if (!(phi.a > 0 && phi.a <= 1)) at.fail("clamped scale must lie in (0, 1] so that phi(s) <= s");
    if (!(phi.b > 0)) at.fail("clamped cap must be positive");
  } else {
    at.fail("unknown relaxation kind '" + kind + "' (const | clamped)");
  }
  return phi;
}

std::size_t parse_grid(const std::string& v, const LineError& at) {
  const auto x = v.find('x');
  if (x == std::string::npos) return parse_count(v, at);
  const auto r = parse_count(trim(v.substr(0, x)), at);
  const auto c = parse_count(trim(v.substr(x + 1)), at);
  if (r != c) at.fail("only square grids are supported");
  return r;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::pair<std::string, std::size_t>> entries;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const LineError at{lineno};
    if (eq == std::string::npos) at.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("missing key");
    if (value.empty()) at.fail("missing value for '" + key + "'");
    if (entries.count(key)) at.fail("duplicate key '" + key + "'");
    entries[key] = {value, lineno};
  }

  static const std::set<std::string> known = {
      "problem", "variant", "phi", "tau", "eta", "noise_rel", "seed", "max_cycles", "cgne_cycles",
      "residual_tol", "M", "norm_margin", "output_dir", "grid", "N", "n_t", "n_sigma", "refinement",
      "phantom", "m", "mu_n", "h", "x_min", "x_max", "clamp", "truth", "initial"};
  for (const auto& [key, v] : entries) {
    if (!known.count(key)) LineError{v.second}.fail("unknown key '" + key + "'");
  }

  ExperimentConfig c;
  auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>* {
    auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };

  if (auto e = get("problem")) {
    if (e->first == "radon") c.problem = Problem::Radon;
    else if (e->first == "doping") c.problem = Problem::Doping;
    else LineError{e->second}.fail("problem must be radon or doping");
  }
  if (auto e = get("variant")) {
    static const std::map<std::string, Method> methods = {{"lsdk", Method::LSDK}, {"sdk", Method::SDK},
                                                          {"llk", Method::LLK},   {"lk", Method::LK},
                                                          {"cgne", Method::CGNE}};
    auto it = methods.find(e->first);
    if (it == methods.end()) LineError{e->second}.fail("variant must be one of lsdk, sdk, llk, lk, cgne");
    c.variant = it->second;
  }

  const bool radon = c.problem == Problem::Radon;
  const bool landweber = c.variant == Method::LLK || c.variant == Method::LK;

  // Problem-dependent defaults.
  c.tau = radon ? 2.0 : 2.5;
  c.noise_rel = radon ? 0.04 : 0.001;
  c.n_detectors = radon ? 50 : 11;
  if (radon) {
    c.phi = landweber ? PhiSpec{RelaxationFunction::Kind::Constant, 0.4, 0.4, false}
                      : PhiSpec{RelaxationFunction::Kind::ClampedLinear, 0.4, 2.0, false};
  } else {
    c.phi = landweber ? PhiSpec{RelaxationFunction::Kind::Constant, 0.0, 0.0, true}
                      : PhiSpec{RelaxationFunction::Kind::ClampedLinear, 1.0, 100.0, false};
    c.norm_margin = 1.5;
  }

  for (const auto& [key, entry] : entries) {
    const std::string& v = entry.first;
    const LineError at{entry.second};
    if (key == "problem" || key == "variant") continue;
    if (key == "phi") c.phi = parse_phi(v, at);
    else if (key == "tau") c.tau = parse_real(v, at);
    else if (key == "eta") c.eta = parse_real(v, at);
    else if (key == "noise_rel") c.noise_rel = parse_real(v, at);
    else if (key == "seed") c.seed = parse_count(v, at);
    else if (key == "max_cycles") c.max_cycles = parse_count(v, at);
    else if (key == "cgne_cycles") c.cgne_cycles = parse_count(v, at);
    else if (key == "residual_tol") c.residual_tol = parse_real(v, at);
    else if (key == "M") c.norm_bound = parse_real(v, at);
    else if (key == "norm_margin") c.norm_margin = parse_real(v, at);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "grid") c.grid = parse_grid(v, at);
    else if (key == "N") c.n_detectors = parse_count(v, at);
    else if (key == "n_t") c.n_t = parse_count(v, at);
    else if (key == "n_sigma") c.n_sigma = parse_count(v, at);
    else if (key == "refinement") c.refinement = parse_count(v, at);
    else if (key == "phantom") c.phantom = v;
    else if (key == "m") c.m = parse_count(v, at);
    else if (key == "mu_n") c.mu_n = parse_real(v, at);
    else if (key == "h") c.bump_h = parse_real(v, at);
    else if (key == "x_min") c.x_min = parse_real(v, at);
    else if (key == "x_max") c.x_max = parse_real(v, at);
    else if (key == "clamp") c.clamp = parse_bool(v, at);
    else if (key == "truth") c.truth = v;
    else if (key == "initial") c.initial = v;
  }

  auto line_of = [&](const std::string& key) { return LineError{get(key) ? get(key)->second : 0}; };
  if (!(c.eta >= 0 && c.eta < 0.5)) line_of("eta").fail("eta must lie in [0, 1/2)");
  const double tau_min = radon ? 2.0 : 2.0 * (1.0 + c.eta) / (1.0 - 2.0 * c.eta);
  if (!(c.tau >= tau_min)) {
    std::ostringstream msg;
    msg << "tau = " << c.tau << " violates the discrepancy bound tau >= 2(1+eta)/(1-2eta) = " << tau_min;
    line_of("tau").fail(msg.str());
  }
  if (landweber && c.phi.kind != RelaxationFunction::Kind::Constant) {
    line_of("phi").fail("variants llk and lk need a constant relaxation (phi = const <alpha>)");
  }
  if (!(c.noise_rel >= 0)) line_of("noise_rel").fail("noise_rel must be >= 0");
  if (c.max_cycles == 0) line_of("max_cycles").fail("max_cycles must be >= 1");
  if (c.cgne_cycles == 0) line_of("cgne_cycles").fail("cgne_cycles must be >= 1");
  if (c.residual_tol && !(*c.residual_tol >= 0)) line_of("residual_tol").fail("residual_tol must be >= 0");
  if (c.norm_bound && !(*c.norm_bound > 0)) line_of("M").fail("M must be positive");
  if (!(c.norm_margin >= 1)) line_of("norm_margin").fail("norm_margin must be >= 1");
  if (radon) {
    if (c.grid < 4) line_of("grid").fail("grid must be at least 4");
    if (c.n_detectors < 2) line_of("N").fail("radon needs N >= 2 detectors");
    if (c.n_t == 1) line_of("n_t").fail("n_t must be >= 2");
    if (c.n_sigma != 0 && c.n_sigma < 4) line_of("n_sigma").fail("n_sigma must be >= 4");
    if (c.refinement == 0) line_of("refinement").fail("refinement must be >= 1");
  } else {
    if (c.variant == Method::CGNE) line_of("variant").fail("cgne needs linear blocks; doping is nonlinear");
    if (c.m < 5) line_of("m").fail("m must be at least 5");
    if (c.n_detectors < 1) line_of("N").fail("doping needs N >= 1 voltage profiles");
    if (!(c.mu_n > 0)) line_of("mu_n").fail("mu_n must be positive");
    if (!(c.bump_h > 0 && c.bump_h < 0.5)) line_of("h").fail("h must lie in (0, 1/2)");
    if (!(c.x_min > 0 && c.x_min < c.x_max)) line_of("x_min").fail("need 0 < x_min < x_max");
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig c = parse_config(buf.str());
  // Relative file references resolve against the config's directory.
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (path.parent_path() / p).string();
  };
  resolve(c.phantom);
  resolve(c.truth);
  resolve(c.initial);
  return c;
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

namespace {

BuiltProblem build_radon(const ExperimentConfig& c) {
  const std::size_t n_t = c.n_t ? c.n_t : 2 * c.grid;
  const std::size_t n_sigma = c.n_sigma ? c.n_sigma : 4 * n_t;
  const radon::DetectorSet det = radon::make_detectors(c.n_detectors, n_t, n_sigma);
  const radon::ImageGrid grid{c.grid, c.grid};
  const radon::PhantomSpec spec{c.phantom.empty() ? radon::default_scene() : radon::load_scene(c.phantom), grid};

  BuiltProblem p;
  p.norm_bound = c.norm_bound.value_or(1.0);
  p.exact_data = radon::synthesize_data(spec, det, c.refinement);
  radon::NoisyData noisy = radon::add_noise(p.exact_data, c.noise_rel, c.seed);
  for (std::size_t i = 0; i < det.size(); ++i) p.system.blocks.push_back(radon::make_radon_block(det, i, grid, p.norm_bound));
  p.system.noisy_data = std::move(noisy.y_delta);
  p.system.noise_levels = std::move(noisy.delta);
  p.system.exact_solution = radon::make_phantom(spec);
  p.x0 = grid.zeros();
  return p;
}

BuiltProblem build_doping(const ExperimentConfig& c) {
  doping::DeviceGrid grid;
  grid.m = c.m;
  grid.mu_n = c.mu_n;
  grid.x_min = c.x_min;
  grid.x_max = c.x_max;
  grid.validate();

  const ParameterVector truth =
      c.truth.empty() ? doping::default_true_profile(grid) : doping::read_grid_dump(c.truth, grid.cell_weight());
  const ParameterVector x0 =
      c.initial.empty() ? grid.constant(1.0) : doping::read_grid_dump(c.initial, grid.cell_weight());
  if (truth.shape() != grid.shape() || x0.shape() != grid.shape()) {
    throw ConfigError("doping profiles must be " + std::to_string(grid.m) + "x" + std::to_string(grid.m));
  }

  const auto profiles = doping::make_voltage_profiles(grid, c.n_detectors, c.bump_h);
  BuiltProblem p;
  for (const auto& u : profiles) p.system.blocks.push_back(doping::make_doping_block(grid, u));

  if (c.norm_bound) {
    p.norm_bound = *c.norm_bound;
  } else {
    double estimate = 0.0;
    for (std::size_t i = 0; i < p.system.blocks.size(); ++i) {
      estimate = std::max(estimate, estimate_operator_norm(p.system.blocks[i], x0, 5, splitmix64(c.seed + i)));
    }
    p.norm_bound = c.norm_margin * estimate;
  }
  for (auto& b : p.system.blocks) b.norm_bound = p.norm_bound;

  for (const auto& b : p.system.blocks) p.exact_data.push_back(b.apply(truth));
  radon::NoisyData noisy = radon::add_noise(p.exact_data, c.noise_rel, c.seed);
  p.system.noisy_data = std::move(noisy.y_delta);
  p.system.noise_levels = std::move(noisy.delta);
  p.system.exact_solution = truth;
  p.x0 = x0;
  return p;
}

}  // namespace

BuiltProblem build_problem(const ExperimentConfig& config) {
  return config.problem == Problem::Radon ? build_radon(config) : build_doping(config);
}

SolverConfig make_solver_config(const ExperimentConfig& c, const BuiltProblem& p) {
  SolverConfig s;
  switch (c.variant) {
    case Method::LSDK: s.variant = Variant::LSDK; break;
    case Method::SDK: s.variant = Variant::SDK; break;
    case Method::LLK: s.variant = Variant::LLK; break;
    case Method::LK: s.variant = Variant::LK; break;
    case Method::CGNE: throw UnsupportedVariantError("CGNE has no Kaczmarz solver configuration");
  }
  s.tau = c.tau;
  s.eta = c.eta;
  s.norm_bound = p.norm_bound;
  if (c.phi.kind == RelaxationFunction::Kind::Constant) {
    const double value = c.phi.auto_constant ? 1.0 / (p.norm_bound * p.norm_bound) : c.phi.a;
    s.phi = RelaxationFunction::constant(value);
    if (!s.phi.admissible_for(p.norm_bound)) {
      throw ConfigError("constant relaxation " + format_real(value) + " exceeds 1/M^2 = " +
                        format_real(1.0 / (p.norm_bound * p.norm_bound)));
    }
  } else {
    s.phi = RelaxationFunction::clamped_linear(c.phi.a, c.phi.b);
  }
  s.max_cycles = c.max_cycles;
  s.exact_data_residual_tol = c.residual_tol;
  s.linear_system = p.system.all_linear();
  if (c.problem == Problem::Doping && c.clamp) s.clamp_bounds = std::make_pair(c.x_min, c.x_max);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace {

void fill_final_residuals(const ProblemSystem& system, double tau, const ParameterVector& x, ExperimentResult& r) {
  r.final_residuals.clear();
  r.summary.max_discrepancy_ratio = 0.0;
  r.summary.max_residual = 0.0;
  for (std::size_t i = 0; i < system.size(); ++i) {
    const double res = norm(system.blocks[i].apply(x) - system.noisy_data[i]);
    r.final_residuals.push_back(res);
    r.summary.max_residual = std::max(r.summary.max_residual, res);
    const double threshold = tau * system.noise_levels[i];
    const double ratio = threshold > 0 ? res / threshold : (res > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.summary.max_discrepancy_ratio = std::max(r.summary.max_discrepancy_ratio, ratio);
  }
  r.noise_levels = system.noise_levels;
}

}  // namespace

ExperimentResult execute(const ExperimentConfig& config) { return execute(config, build_problem(config)); }

ExperimentResult execute(const ExperimentConfig& config, const BuiltProblem& problem) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r;
  r.summary.variant = config.variant;
  r.summary.norm_bound = problem.norm_bound;
  r.truth = problem.system.exact_solution;
  const std::size_t n = problem.system.size();
  const double truth_norm = r.truth ? norm(*r.truth) : 0.0;

  if (config.variant == Method::CGNE) {
    CgneResult cg = cgne_run(problem.system, problem.x0, config.cgne_cycles);
    const std::size_t performed = cg.per_cycle_residual.size() - 1;
    r.cgne_errors = cg.per_cycle_error;
    r.x_final = cg.x_best;
    r.summary.cycles = r.truth ? cg.best_cycle : performed;
    r.per_cycle_updates.assign(r.summary.cycles, n);
    r.summary.total_updates = r.summary.cycles * n;
    r.summary.forward_evals = n * (performed + 1);
    r.summary.adjoint_evals = n * (performed + 1);
    r.summary.stop_reason = r.truth ? "min-error-cycle" : "max-cycles";
    if (r.truth) {
      r.summary.final_error = cg.per_cycle_error[cg.best_cycle];
      r.summary.min_error = r.summary.final_error;
      r.summary.min_error_cycle = cg.best_cycle;
    }
  } else {
    const SolverConfig sc = make_solver_config(config, problem);
    SolveResult sr = run(problem.system, sc, problem.x0);
    r.trace = std::move(sr.trace);
    r.x_final = std::move(sr.x_final);
    r.per_cycle_updates = r.trace.per_cycle_updates;
    r.summary.cycles = r.trace.cycles();
    r.summary.total_updates = r.trace.total_updates();
    r.summary.forward_evals = r.trace.forward_evals;
    r.summary.adjoint_evals = r.trace.adjoint_evals;
    r.summary.stop_reason = to_string(r.trace.stop_reason);
    r.summary.alpha_min = r.trace.alpha_min;
    r.summary.step_bound_violations = r.trace.step_bound_violations;
    r.summary.alpha_floor_violations = r.trace.alpha_floor_violations;
    if (r.truth && truth_norm > 0) {
      const double final_error = norm(r.x_final - *r.truth) / truth_norm;
      r.summary.final_error = final_error;
      // Error at the start of each cycle, plus the final iterate.
      double best = final_error;
      std::size_t best_cycle = r.trace.cycles();
      for (std::size_t c = 0; c * n < r.trace.steps.size(); ++c) {
        const auto& e = r.trace.steps[c * n].error_rel;
        if (e && *e < best) {
          best = *e;
          best_cycle = c;
        }
      }
      r.summary.min_error = best;
      r.summary.min_error_cycle = best_cycle;
    }
  }
  fill_final_residuals(problem.system, config.tau, r.x_final, r);
  r.summary.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& output_dir) {
  fs::create_directories(output_dir);
  const std::vector<fs::path> artifacts = {output_dir / "trace.csv", output_dir / "cycles.csv",
                                           output_dir / "summary.txt", output_dir / "recon.pgm",
                                           output_dir / "truth.pgm", output_dir / "timing.txt"};
  try {
    ExperimentResult r = execute(config);
    write_trace_csv(r.trace, r.final_residuals.size(), artifacts[0]);
    write_cycles_csv(r.per_cycle_updates, artifacts[1]);
    std::string summary = "problem: " + to_string(config.problem) + "\n" + summary_text(r.summary);
    {
      std::ofstream out(artifacts[2], std::ios::binary);
      out << summary;
      if (!out) throw Error("failed writing " + artifacts[2].string());
    }
    write_pgm(r.x_final, artifacts[3]);
    if (r.truth) write_pgm(*r.truth, artifacts[4]);
    {
      std::ofstream out(artifacts[5], std::ios::binary);
      out << "runtime_seconds: " << format_real(r.summary.runtime_seconds) << '\n';
    }
    return r;
  } catch (...) {
    std::error_code ec;
    for (const auto& a : artifacts) fs::remove(a, ec);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Formats
// ---------------------------------------------------------------------------

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(const IterationTrace& trace, std::size_t n_equations, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "cycle,k,op_index,omega,alpha,residual_norm,step_norm,error_rel\n";
  const std::size_t n = std::max<std::size_t>(n_equations, 1);
  for (const StepRecord& s : trace.steps) {
    out << s.k / n << ',' << s.k << ',' << s.op_index << ',' << s.omega << ',' << format_real(s.alpha) << ','
        << format_real(s.residual_norm) << ',' << (s.step_norm ? format_real(*s.step_norm) : "") << ','
        << (s.error_rel ? format_real(*s.error_rel) : "") << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

void write_cycles_csv(const std::vector<std::size_t>& per_cycle_updates, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "cycle,updates\n";
  for (std::size_t c = 0; c < per_cycle_updates.size(); ++c) out << c << ',' << per_cycle_updates[c] << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::string summary_text(const ExperimentSummary& s) {
  std::ostringstream out;
  out << "variant: " << to_string(s.variant) << '\n';
  out << "stop_reason: " << s.stop_reason << '\n';
  out << "cycles: " << s.cycles << '\n';
  out << "total_updates: " << s.total_updates << '\n';
  out << "forward_evals: " << s.forward_evals << '\n';
  out << "adjoint_evals: " << s.adjoint_evals << '\n';
  out << "final_relative_error: " << (s.final_error ? format_real(*s.final_error) : "n/a") << '\n';
  out << "min_relative_error: " << (s.min_error ? format_real(*s.min_error) : "n/a") << '\n';
  out << "min_error_cycle: " << s.min_error_cycle << '\n';
  out << "max_residual_over_threshold: " << format_real(s.max_discrepancy_ratio) << '\n';
  out << "max_residual: " << format_real(s.max_residual) << '\n';
  out << "alpha_min: " << format_real(s.alpha_min) << '\n';
  out << "norm_bound: " << format_real(s.norm_bound) << '\n';
  out << "step_bound_violations: " << s.step_bound_violations << '\n';
  out << "alpha_floor_violations: " << s.alpha_floor_violations << '\n';
  return out.str();
}

PgmImage encode_pgm(const ParameterVector& field) {
  if (!field.all_finite()) throw DomainError("cannot render a field with non-finite values");
  PgmImage img;
  img.rows = field.shape().rows;
  img.cols = field.shape().cols;
  const auto v = field.values();
  img.min = v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
  img.max = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  const double range = img.max > img.min ? img.max - img.min : 1.0;
  img.pixels.reserve(v.size());
  for (double x : v) {
    const int p = static_cast<int>(std::floor((x - img.min) / range * 255.0));
    img.pixels.push_back(std::clamp(p, 0, 255));
  }
  return img;
}

void write_pgm(const ParameterVector& field, const fs::path& path) {
  const PgmImage img = encode_pgm(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P2\n# min=" << format_real(img.min) << " max=" << format_real(img.max) << '\n'
      << img.cols << ' ' << img.rows << "\n255\n";
  for (std::size_t r = 0; r < img.rows; ++r) {
    for (std::size_t c = 0; c < img.cols; ++c) {
      if (c) out << ' ';
      out << img.pixels[r * img.cols + c];
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

PgmImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (trim(magic) != "P2") throw Error(path.string() + " is not an ASCII PGM");
  PgmImage img;
  bool have_scale = false;
  std::vector<long> numbers;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      const auto mn = line.find("min=");
      const auto mx = line.find("max=");
      if (mn != std::string::npos && mx != std::string::npos) {
        const std::string a = trim(line.substr(mn + 4, mx - mn - 4));
        const std::string b = trim(line.substr(mx + 4));
        std::from_chars(a.data(), a.data() + a.size(), img.min);
        std::from_chars(b.data(), b.data() + b.size(), img.max);
        have_scale = true;
      }
      continue;
    }
    std::istringstream ls(line);
    for (long v; ls >> v;) numbers.push_back(v);
  }
  if (numbers.size() < 3) throw Error(path.string() + ": truncated PGM header");
  img.cols = static_cast<std::size_t>(numbers[0]);
  img.rows = static_cast<std::size_t>(numbers[1]);
  if (numbers.size() != 3 + img.rows * img.cols) throw Error(path.string() + ": pixel count mismatch");
  img.pixels.assign(numbers.begin() + 3, numbers.end());
  if (!have_scale) {
    img.min = 0;
    img.max = static_cast<double>(numbers[2]);
  }
  return img;
}

}  // namespace lsdk::harness
