#include "lsdk/core.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <utility>

namespace lsdk {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_slot() {
  static WarningSink sink;
  return sink;
}

void check_same_space(const ParameterVector& a, const ParameterVector& b) {
  if (a.shape() != b.shape() || a.size() != b.size()) {
    throw DimensionError("parameter vectors live on different grids");
  }
  if (a.cell_weight() != b.cell_weight()) {
    throw DimensionError("parameter vectors carry different cell weights");
  }
}

void check_same_space(const DataBlock& a, const DataBlock& b) {
  if (a.size() != b.size()) {
    throw DimensionError("data blocks have different lengths (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  if (!std::equal(a.weights().begin(), a.weights().end(), b.weights().begin())) {
    throw DimensionError("data blocks carry different quadrature weights");
  }
}

}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  sink_slot() = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) {
    sink_slot()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

// ParameterVector ----------------------------------------------------------

ParameterVector::ParameterVector(GridShape shape, double cell_weight)
    : ParameterVector(shape, cell_weight, std::vector<double>(shape.size(), 0.0)) {}

ParameterVector::ParameterVector(GridShape shape, double cell_weight, std::vector<double> values)
    : shape_(shape), cell_weight_(cell_weight), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw DimensionError("parameter vector has " + std::to_string(values_.size()) +
                         " values for a " + std::to_string(shape_.rows) + "x" +
                         std::to_string(shape_.cols) + " grid");
  }
  if (!(cell_weight_ > 0.0) || !std::isfinite(cell_weight_)) {
    throw DimensionError("cell weight must be positive and finite");
  }
}

bool ParameterVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ParameterVector::axpy(double a, const ParameterVector& other) {
  check_same_space(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * other.values_[i];
}

void ParameterVector::scale(double a) {
  for (double& v : values_) v *= a;
}

// DataBlock ------------------------------------------------------------------

DataBlock::DataBlock(std::vector<double> weights)
    : values_(weights.size(), 0.0), weights_(std::move(weights)) {}

DataBlock::DataBlock(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (values_.size() != weights_.size()) {
    throw DimensionError("data block values and weights differ in length");
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DimensionError("quadrature weights must be >= 0");
  }
}

void DataBlock::axpy(double a, const DataBlock& other) {
  check_same_space(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * other.values_[i];
}

void DataBlock::scale(double a) {
  for (double& v : values_) v *= a;
}

// Inner products -------------------------------------------------------------

double inner_product(const ParameterVector& a, const ParameterVector& b) {
  check_same_space(a, b);
  double sum = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) sum += av[i] * bv[i];
  return a.cell_weight() * sum;
}

double inner_product(const DataBlock& a, const DataBlock& b) {
  check_same_space(a, b);
  double sum = 0.0;
  auto w = a.weights();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) sum += w[i] * av[i] * bv[i];
  return sum;
}

double norm(const ParameterVector& a) { return std::sqrt(inner_product(a, a)); }
double norm(const DataBlock& a) { return std::sqrt(inner_product(a, a)); }

ParameterVector operator-(const ParameterVector& a, const ParameterVector& b) {
  ParameterVector out = a;
  out.axpy(-1.0, b);
  return out;
}

DataBlock operator-(const DataBlock& a, const DataBlock& b) {
  DataBlock out = a;
  out.axpy(-1.0, b);
  return out;
}

// Operators --------------------------------------------------------------------

OperatorBlock make_linear_block(std::function<DataBlock(const ParameterVector&)> apply,
                                std::function<ParameterVector(const DataBlock&)> adjoint,
                                DataBlock data_template, double norm_bound,
                                double adjoint_tolerance) {
  OperatorBlock block;
  block.apply = apply;
  block.derivative_apply = [apply](const ParameterVector&, const ParameterVector& h) {
    return apply(h);
  };
  block.adjoint_derivative_apply = [adjoint = std::move(adjoint)](const ParameterVector&,
                                                                   const DataBlock& r) {
    return adjoint(r);
  };
  block.norm_bound = norm_bound;
  block.is_linear = true;
  block.adjoint_tolerance = adjoint_tolerance;
  block.data_template = std::move(data_template);
  return block;
}

bool ProblemSystem::exact_data() const {
  return std::any_of(noise_levels.begin(), noise_levels.end(), [](double d) { return d == 0.0; });
}

bool ProblemSystem::all_linear() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const OperatorBlock& b) { return b.is_linear; });
}

void ProblemSystem::validate() const {
  if (blocks.empty()) throw DimensionError("problem system has no equations");
  if (noisy_data.size() != blocks.size() || noise_levels.size() != blocks.size()) {
    throw DimensionError("problem system: blocks, data and noise levels differ in count");
  }
  for (double d : noise_levels) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw DimensionError("noise levels must be finite and >= 0");
  }
}

// Relaxation -------------------------------------------------------------------

RelaxationFunction RelaxationFunction::constant(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError("constant relaxation must be positive and finite");
  }
  return {Kind::Constant, value, value};
}

RelaxationFunction RelaxationFunction::clamped_linear(double scale, double cap) {
  if (!(scale > 0.0) || !(cap > 0.0) || !std::isfinite(scale) || !std::isfinite(cap)) {
    throw ConfigError("clamped relaxation needs positive finite scale and cap");
  }
  return {Kind::ClampedLinear, scale, cap};
}

double RelaxationFunction::operator()(double s) const {
  if (kind_ == Kind::Constant) return scale_;
  return std::min(scale_ * s, cap_);
}

bool RelaxationFunction::admissible_for(double norm_bound) const {
  const double s_min = 1.0 / (norm_bound * norm_bound);
  if (kind_ == Kind::Constant) return scale_ <= s_min;
  return scale_ <= 1.0;
}

// Randomness -------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

double Rng::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

void Rng::fill_normal(std::span<double> out) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : out) v = dist(engine_);
}

// Generic numerics ---------------------------------------------------------------

double estimate_operator_norm(const OperatorBlock& block, const ParameterVector& x,
                              std::size_t iterations, std::uint64_t seed) {
  if (iterations == 0) throw DegenerateInputError("power iteration needs at least one step");
  Rng rng(seed);
  ParameterVector v = x.zeros_like();
  rng.fill_normal(v.values());
  double v_norm = norm(v);
  if (!(v_norm > 0.0)) throw DegenerateInputError("power iteration start vector is zero");
  v.scale(1.0 / v_norm);

  // Rayleigh quotients of F'*F' are non-decreasing along the power sequence.
  double estimate = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    DataBlock w = block.derivative_apply(x, v);
    estimate = std::max(estimate, norm(w));
    ParameterVector z = block.adjoint_derivative_apply(x, w);
    double z_norm = norm(z);
    if (!(z_norm > 0.0)) break;
    v = std::move(z);
    v.scale(1.0 / z_norm);
  }
  return estimate;
}

AdjointReport validate_adjoint(const OperatorBlock& block, const ParameterVector& x,
                               std::size_t trials, std::uint64_t seed, double tol) {
  Rng rng(seed);
  AdjointReport report;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t t = 0; t < trials; ++t) {
    ParameterVector h = x.zeros_like();
    rng.fill_normal(h.values());
    DataBlock r = block.data_template.zeros_like();
    rng.fill_normal(r.values());
    const double lhs = inner_product(block.derivative_apply(x, h), r);
    const double rhs = inner_product(h, block.adjoint_derivative_apply(x, r));
    const double defect = std::abs(lhs - rhs) / (std::abs(lhs) + eps);
    report.max_relative_defect = std::max(report.max_relative_defect, defect);
  }
  report.pass = report.max_relative_defect <= tol;
  return report;
}

}  // namespace lsdk
