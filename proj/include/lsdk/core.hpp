#ifndef LSDK_CORE_HPP
#define LSDK_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsdk {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct DegenerateInputError : Error {
  using Error::Error;
};

struct DegenerateStepError : Error {
  using Error::Error;
};

struct DegenerateCurvatureError : DegenerateStepError {
  using DegenerateStepError::DegenerateStepError;
};

struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step(step) {}
  std::size_t step;
};

struct DomainError : Error {
  using Error::Error;
};

struct SolverFailure : Error {
  SolverFailure(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

struct UnsupportedVariantError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Warnings go to stderr unless a sink is installed.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Element of the solution space: a field on a rectangular grid with
/// uniform quadrature weight per cell.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(GridShape shape, double cell_weight);
  ParameterVector(GridShape shape, double cell_weight, std::vector<double> values);

  const GridShape& shape() const { return shape_; }
  double cell_weight() const { return cell_weight_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * shape_.cols + col]; }
  double& at(std::size_t row, std::size_t col) { return values_[row * shape_.cols + col]; }

  bool all_finite() const;

  /// Same grid and weight, all zeros.
  ParameterVector zeros_like() const { return ParameterVector(shape_, cell_weight_); }

  /// this += a * other
  void axpy(double a, const ParameterVector& other);
  void scale(double a);

 private:
  GridShape shape_;
  double cell_weight_ = 1.0;
  std::vector<double> values_;
};

/// Measurement for one equation, carrying its own quadrature weights.
class DataBlock {
 public:
  DataBlock() = default;
  explicit DataBlock(std::vector<double> weights);
  DataBlock(std::vector<double> values, std::vector<double> weights);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> weights() const { return weights_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  DataBlock zeros_like() const { return DataBlock(weights_); }

  void axpy(double a, const DataBlock& other);
  void scale(double a);

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

double inner_product(const ParameterVector& a, const ParameterVector& b);
double inner_product(const DataBlock& a, const DataBlock& b);
double norm(const ParameterVector& a);
double norm(const DataBlock& a);

ParameterVector operator-(const ParameterVector& a, const ParameterVector& b);
DataBlock operator-(const DataBlock& a, const DataBlock& b);

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// One equation F_i of the system as matrix-free callables.
struct OperatorBlock {
  std::function<DataBlock(const ParameterVector&)> apply;
  std::function<DataBlock(const ParameterVector&, const ParameterVector&)> derivative_apply;
  std::function<ParameterVector(const ParameterVector&, const DataBlock&)> adjoint_derivative_apply;
  double norm_bound = 1.0;
  bool is_linear = false;
  double adjoint_tolerance = 1e-10;
  /// Template for the data space of this block (weights, length).
  DataBlock data_template;
};

/// Builds a block from a linear map and its adjoint.
OperatorBlock make_linear_block(std::function<DataBlock(const ParameterVector&)> apply,
                                std::function<ParameterVector(const DataBlock&)> adjoint,
                                DataBlock data_template, double norm_bound,
                                double adjoint_tolerance = 1e-10);

struct ProblemSystem {
  std::vector<OperatorBlock> blocks;
  std::vector<DataBlock> noisy_data;
  std::vector<double> noise_levels;
  std::optional<ParameterVector> exact_solution;

  std::size_t size() const { return blocks.size(); }
  bool exact_data() const;
  bool all_linear() const;
  /// Throws DimensionError when the three lists disagree or are empty.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Relaxation
// ---------------------------------------------------------------------------

class RelaxationFunction {
 public:
  enum class Kind { Constant, ClampedLinear };

  static RelaxationFunction constant(double value);
  static RelaxationFunction clamped_linear(double scale, double cap);

  Kind kind() const { return kind_; }
  double scale() const { return scale_; }
  double cap() const { return cap_; }
  double alpha_max() const { return kind_ == Kind::Constant ? scale_ : cap_; }

  double operator()(double s) const;

  /// Checks Φ(s) ≤ s on [1/M², ∞).
  bool admissible_for(double norm_bound) const;

 private:
  RelaxationFunction(Kind kind, double scale, double cap) : kind_(kind), scale_(scale), cap_(cap) {}
  Kind kind_;
  double scale_;
  double cap_;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Seeded generator that can derive independent child streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::uint64_t stream) const;
  double normal();
  double uniform(double lo, double hi);
  std::uint64_t seed() const { return seed_; }

  void fill_normal(std::span<double> out);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Generic numerics
// ---------------------------------------------------------------------------

double estimate_operator_norm(const OperatorBlock& block, const ParameterVector& x,
                              std::size_t iterations, std::uint64_t seed);

struct AdjointReport {
  double max_relative_defect = 0.0;
  bool pass = false;
};

AdjointReport validate_adjoint(const OperatorBlock& block, const ParameterVector& x,
                               std::size_t trials, std::uint64_t seed, double tol);

}  // namespace lsdk

#endif  // LSDK_CORE_HPP
