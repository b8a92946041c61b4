// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lsdk/doping.hpp"
#include "lsdk/harness.hpp"
#include "lsdk/radon.hpp"

using namespace lsdk;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

struct Line {
  int id;
  std::string text;
  bool pass;
};

std::vector<Line> lines;

// Criteria run in dependency order; lines are printed sorted by number at
// the end, progress goes to stderr meanwhile.
void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o{false, ""};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  char head[64];
  std::snprintf(head, sizeof head, "[%s] %2d ", o.pass ? "PASS" : "FAIL", id);
  char tail[32];
  std::snprintf(tail, sizeof tail, " (%.1f s)", seconds_since(t0));
  lines.push_back({id, head + title + ": " + o.detail + tail, o.pass});
  std::fprintf(stderr, "%s\n", lines.back().text.c_str());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Every solver run in this binary feeds the step-size floor check.
std::size_t runs_checked = 0;
std::size_t floor_violations = 0;
std::size_t steps_checked = 0;

void account(const IterationTrace& t) {
  ++runs_checked;
  floor_violations += t.alpha_floor_violations;
  for (const auto& s : t.steps) {
    ++steps_checked;
    if (s.alpha < t.alpha_min) ++floor_violations;
  }
}

harness::ExperimentResult run(const harness::ExperimentConfig& c) {
  harness::ExperimentResult r = harness::execute(c);
  if (c.variant != harness::Method::CGNE) account(r.trace);
  return r;
}

harness::ExperimentConfig radon_config(const std::string& extra) {
  return harness::parse_config("problem = radon\n" + extra);
}

harness::ExperimentConfig doping_config(const std::string& extra) {
  return harness::parse_config("problem = doping\n" + extra);
}

std::string trace_bytes(const IterationTrace& t, std::size_t n) {
  const fs::path p = fs::temp_directory_path() / "lsdk_acceptance_trace.csv";
  harness::write_trace_csv(t, n, p);
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(p);
  return ss.str();
}

bool all_below_threshold(const harness::ExperimentResult& r, double tau) {
  for (std::size_t i = 0; i < r.final_residuals.size(); ++i)
    if (!(r.final_residuals[i] < tau * r.noise_levels[i])) return false;
  return true;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

}  // namespace

int main() {
  report(1, "adjoint identities", [] {
    const auto t0 = Clock::now();
    const radon::ImageGrid g{60, 60};
    const radon::DetectorSet det = radon::make_detectors(50, 120, 480);
    double radon_defect = 0.0;
    bool radon_ok = true;
    for (std::size_t i = 0; i < det.size(); ++i) {  // 2 probes × 50 blocks
      const AdjointReport rep = validate_adjoint(radon::make_radon_block(det, i, g), g.zeros(), 2, 500 + i, 1e-10);
      radon_defect = std::max(radon_defect, rep.max_relative_defect);
      radon_ok = radon_ok && rep.pass;
    }
    const double radon_time = seconds_since(t0);

    const auto t1 = Clock::now();
    doping::DeviceGrid dg;
    dg.m = 17;
    const auto profiles = doping::make_voltage_profiles(dg, 10, 1.0 / 32.0);
    const ParameterVector x = doping::default_true_profile(dg);
    double doping_defect = 0.0;
    bool doping_ok = true;
    for (std::size_t i = 0; i < profiles.size(); ++i) {  // 2 probes × 10 blocks
      const AdjointReport rep = validate_adjoint(doping::make_doping_block(dg, profiles[i]), x, 2, 900 + i, 1e-8);
      doping_defect = std::max(doping_defect, rep.max_relative_defect);
      doping_ok = doping_ok && rep.pass;
    }
    const double doping_time = seconds_since(t1);
    const bool pass = radon_ok && radon_defect <= 1e-10 && radon_time < 10 && doping_ok && doping_defect <= 1e-8 &&
                      doping_time < 30;
    return Outcome{pass, "radon defect " + fmt(radon_defect) + " in " + fmt(radon_time) + " s, doping defect " +
                             fmt(doping_defect) + " in " + fmt(doping_time) + " s"};
  });

  report(2, "operator norm bound", [] {
    const radon::ImageGrid g{60, 60};
    const radon::DetectorSet det = radon::make_detectors(50, 120, 480);
    double worst = 0.0;
    for (std::size_t i : {0, 12, 24, 36, 49})
      worst = std::max(worst, estimate_operator_norm(radon::make_radon_block(det, i, g), g.zeros(), 50, i + 1));
    return Outcome{worst <= 1.05, "max power-iteration estimate " + fmt(worst)};
  });

  // Criteria 3, 6, 8 and 10 share the 120x120 l-SDK run.
  const harness::ExperimentConfig table_lsdk = radon_config("variant = lsdk\n");
  std::optional<harness::ExperimentResult> desk;
  double lsdk_time = 0.0;
  try {
    const auto t0 = Clock::now();
    desk = run(table_lsdk);
    lsdk_time = seconds_since(t0);
  } catch (const std::exception& e) {
    std::printf("l-SDK desk run failed: %s\n", e.what());
  }

  report(3, "step bound on every update", [&] {
    if (!desk) return Outcome{false, "radon l-SDK run unavailable"};
    std::size_t updates = 0, violations = 0;
    for (const auto& s : desk->trace.steps) {
      if (s.omega != 1) continue;
      ++updates;
      const double lhs = s.alpha * (*s.step_norm) * (*s.step_norm);
      if (lhs > s.residual_norm * s.residual_norm * (1 + 1e-12)) ++violations;
    }
    violations = std::max(violations, desk->trace.step_bound_violations);
    return Outcome{violations == 0 && updates > 0,
                   std::to_string(violations) + " violations over " + std::to_string(updates) + " updates"};
  });

  report(5, "monotone error on a consistent system", [] {
    const auto t0 = Clock::now();
    const harness::ExperimentConfig c = radon_config("grid = 60\nrefinement = 1\nnoise_rel = 0.04\ntau = 2\n");
    const auto r = run(c);
    double prev = std::numeric_limits<double>::infinity();
    std::size_t increases = 0;
    for (const auto& s : r.trace.steps) {
      if (*s.error_rel > prev * (1 + 1e-9)) ++increases;
      prev = *s.error_rel;
    }
    if (*r.summary.final_error > prev * (1 + 1e-9)) ++increases;
    const double t = seconds_since(t0);
    return Outcome{increases == 0 && t < 60, std::to_string(increases) + " increases over " +
                                                 std::to_string(r.trace.steps.size()) + " steps, final error " +
                                                 fmt(*r.summary.final_error)};
  });

  report(7, "residual summability with exact data", [] {
    const harness::ExperimentConfig c =
        radon_config("grid = 40\nrefinement = 1\nnoise_rel = 0\nmax_cycles = 50\nresidual_tol = 0\n");
    const harness::BuiltProblem p = harness::build_problem(c);
    const SolveResult r = lsdk::run(p.system, harness::make_solver_config(c, p), p.x0);
    account(r.trace);
    double sum = 0.0;
    for (const auto& s : r.trace.steps) sum += s.alpha * s.residual_norm * s.residual_norm;
    const double bound = std::pow(norm(p.x0 - *p.system.exact_solution), 2);
    return Outcome{sum <= 1.01 * bound && r.trace.cycles() == 50,
                   "sum " + fmt(sum) + " vs 1.01 * " + fmt(bound) + " over " + std::to_string(r.trace.cycles()) +
                       " cycles"};
  });

  report(8, "desk-scale method comparison", [&] {
    if (!desk) return Outcome{false, "radon l-SDK run unavailable"};
    const double e_lsdk = *desk->summary.final_error;
    const std::size_t c_lsdk = desk->summary.cycles;

    auto t0 = Clock::now();
    const auto llk = run(radon_config("variant = llk\nphi = const 0.4\n"));
    const double llk_time = seconds_since(t0);
    t0 = Clock::now();
    const auto cgne = run(radon_config("variant = cgne\n"));
    const double cgne_time = seconds_since(t0);

    const double e_llk = *llk.summary.final_error;
    const double e_cgne = *cgne.summary.min_error;
    const bool pass = e_lsdk <= 0.25 && c_lsdk <= 15 && e_llk <= 0.25 && e_cgne >= 0.15 && e_cgne <= 0.30 &&
                      lsdk_time < 180 && llk_time < 180 && cgne_time < 180;
    return Outcome{pass, "l-SDK " + fmt(100 * e_lsdk) + "% in " + std::to_string(c_lsdk) + " cycles (" +
                             fmt(lsdk_time) + " s), l-LK " + fmt(100 * e_llk) + "% in " +
                             std::to_string(llk.summary.cycles) + " cycles (" + fmt(llk_time) + " s), CGNE " +
                             fmt(100 * e_cgne) + "% at cycle " + std::to_string(cgne.summary.min_error_cycle) + " (" +
                             fmt(cgne_time) + " s)"};
  });

  report(10, "loping profile", [&] {
    if (!desk) return Outcome{false, "radon l-SDK run unavailable"};
    const auto& u = desk->per_cycle_updates;
    const std::size_t n = table_lsdk.n_detectors;
    const bool last_zero = !u.empty() && u.back() == 0;
    const bool partial = std::any_of(u.begin(), u.end() - (u.empty() ? 0 : 1), [n](std::size_t k) { return k < n; });
    std::string profile;
    for (std::size_t k : u) profile += (profile.empty() ? "" : " ") + std::to_string(k);
    return Outcome{last_zero && partial, "updates per cycle: " + profile};
  });

  // Doping runs for criteria 6 and 9.
  std::optional<harness::ExperimentResult> d_lsdk, d_llk, d_lk;
  double doping_time = 0.0;
  try {
    const auto t0 = Clock::now();
    d_lsdk = run(doping_config("variant = lsdk\n"));
    d_llk = run(doping_config("variant = llk\n"));
    const double target = std::min(d_lsdk->summary.max_residual, d_llk->summary.max_residual);
    std::ostringstream lk;
    lk << "variant = lk\nresidual_tol = " << harness::format_real(target) << "\n";
    d_lk = run(doping_config(lk.str()));
    doping_time = seconds_since(t0);
  } catch (const std::exception& e) {
    std::printf("doping runs failed: %s\n", e.what());
  }

  report(6, "residuals below threshold when all equations lope", [&] {
    if (!desk || !d_lsdk) return Outcome{false, "runs unavailable"};
    const bool radon_ok = desk->summary.stop_reason == "all-loped" && desk->final_residuals.size() == 50 &&
                          all_below_threshold(*desk, table_lsdk.tau);
    const bool doping_ok = d_lsdk->summary.stop_reason == "all-loped" && d_lsdk->final_residuals.size() == 11 &&
                           all_below_threshold(*d_lsdk, 2.5);
    return Outcome{radon_ok && doping_ok, "radon max residual/threshold " + fmt(desk->summary.max_discrepancy_ratio) +
                                              ", doping " + fmt(d_lsdk->summary.max_discrepancy_ratio)};
  });

  report(9, "doping cycle ordering", [&] {
    if (!d_lsdk || !d_llk || !d_lk) return Outcome{false, "doping runs unavailable"};
    const std::size_t a = d_lsdk->summary.cycles, b = d_llk->summary.cycles, c = d_lk->summary.cycles;
    const std::size_t adj_lsdk = d_lsdk->summary.adjoint_evals, adj_lk = d_lk->summary.adjoint_evals;
    const bool lk_reached = d_lk->summary.stop_reason == "exact-data-tol";
    const bool pass = a <= b && b <= c && lk_reached && 2 * adj_lsdk < adj_lk && doping_time < 300;
    return Outcome{pass, "cycles l-SDK " + std::to_string(a) + ", l-LK " + std::to_string(b) + ", LK " +
                             std::to_string(c) + (lk_reached ? "" : " (tolerance not reached)") +
                             "; adjoint evals " + std::to_string(adj_lsdk) + " vs " + std::to_string(adj_lk)};
  });

  report(11, "smaller noise gives smaller error", [] {
    std::vector<double> low, high;
    for (int seed : {1, 2, 3}) {
      const std::string base = "grid = 60\nseed = " + std::to_string(seed) + "\n";
      low.push_back(*run(radon_config(base + "noise_rel = 0.01\n")).summary.final_error);
      high.push_back(*run(radon_config(base + "noise_rel = 0.08\n")).summary.final_error);
    }
    const double ml = median3(low), mh = median3(high);
    return Outcome{ml < mh, "median error 1% noise " + fmt(ml) + ", 8% noise " + fmt(mh)};
  });

  report(12, "constant relaxation reproduces l-LK exactly", [] {
    const std::string base = "grid = 60\nphi = const 0.4\n";
    const auto a = run(radon_config(base + "variant = lsdk\n"));
    const auto b = run(radon_config(base + "variant = llk\n"));
    const bool same_trace = trace_bytes(a.trace, 50) == trace_bytes(b.trace, 50);
    bool same_x = a.x_final.size() == b.x_final.size();
    for (std::size_t j = 0; same_x && j < a.x_final.size(); ++j) same_x = a.x_final[j] == b.x_final[j];
    return Outcome{same_trace && same_x, std::to_string(a.trace.steps.size()) + " steps, traces " +
                                             (same_trace ? "identical" : "differ") + ", iterates " +
                                             (same_x ? "identical" : "differ")};
  });

  report(13, "doping derivative against central differences", [] {
    const auto t0 = Clock::now();
    doping::DeviceGrid dg;
    dg.m = 17;
    const auto profiles = doping::make_voltage_profiles(dg, 11, 1.0 / 32.0);
    const ParameterVector x = doping::default_true_profile(dg);
    Rng rng(2024);
    double worst = 0.0;
    for (std::size_t d = 0; d < 10; ++d) {
      const auto& u = profiles[d % profiles.size()];
      ParameterVector dx = x.zeros_like();
      rng.fill_normal(dx.values());
      const double lin = doping::doping_derivative(x, dx, u, dg);
      double best = std::numeric_limits<double>::infinity();
      for (double eps : {1e-3, 1e-4, 1e-5, 1e-6}) {
        ParameterVector xp = x, xm = x;
        xp.axpy(eps, dx);
        xm.axpy(-eps, dx);
        const double fd = (doping::doping_forward(xp, u, dg) - doping::doping_forward(xm, u, dg)) / (2 * eps);
        best = std::min(best, std::abs(fd - lin) / std::abs(lin));
      }
      worst = std::max(worst, best);
    }
    const double t = seconds_since(t0);
    return Outcome{worst <= 5e-4 && t < 60, "max relative difference " + fmt(worst)};
  });

  // Last, so it covers every solver run above.
  report(4, "step size never below the floor", [] {
    return Outcome{floor_violations == 0 && runs_checked > 0,
                   std::to_string(floor_violations) + " violations over " + std::to_string(steps_checked) +
                       " steps in " + std::to_string(runs_checked) + " runs"};
  });

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& l : lines) {
    std::printf("%s\n", l.text.c_str());
    failures += l.pass ? 0 : 1;
  }
  std::printf("%s: %d of %zu criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures, lines.size());
  return failures ? 1 : 0;
}
