// Small dense helpers shared by the unit tests. Everything here is written
// independently of the library's own numerics so it can serve as an oracle.
#ifndef LSDK_TEST_SUPPORT_HPP
#define LSDK_TEST_SUPPORT_HPP

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "lsdk/core.hpp"

namespace test {

using Matrix = std::vector<std::vector<double>>;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist;
  Matrix m(rows, std::vector<double>(cols));
  for (auto& row : m)
    for (double& v : row) v = dist(gen);
  return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j];
  return out;
}

/// y = A x with X weighted by `x.cell_weight()` and Y weighted by `weights`.
/// The adjoint is (1/cw) Aᵀ W r.
inline lsdk::OperatorBlock matrix_block(const Matrix& a, const lsdk::ParameterVector& x_template,
                                        std::vector<double> weights, double norm_bound = 1.0) {
  const lsdk::DataBlock data_template(weights);
  auto apply = [a, weights](const lsdk::ParameterVector& x) {
    lsdk::DataBlock y(weights);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j) y[i] += a[i][j] * x[j];
    return y;
  };
  auto adjoint = [a, weights, x_template](const lsdk::DataBlock& r) {
    lsdk::ParameterVector out = x_template.zeros_like();
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j) out[j] += a[i][j] * weights[i] * r[i];
    out.scale(1.0 / x_template.cell_weight());
    return out;
  };
  return lsdk::make_linear_block(apply, adjoint, data_template, norm_bound);
}

inline lsdk::OperatorBlock identity_block(const lsdk::ParameterVector& x_template) {
  const std::vector<double> weights(x_template.size(), x_template.cell_weight());
  auto apply = [weights](const lsdk::ParameterVector& x) {
    return lsdk::DataBlock(std::vector<double>(x.values().begin(), x.values().end()), weights);
  };
  auto adjoint = [x_template](const lsdk::DataBlock& r) {
    return lsdk::ParameterVector(x_template.shape(), x_template.cell_weight(),
                                 std::vector<double>(r.values().begin(), r.values().end()));
  };
  return lsdk::make_linear_block(apply, adjoint, lsdk::DataBlock(weights), 1.0);
}

/// x ↦ c·x on a single cell with unit weights.
inline lsdk::OperatorBlock scalar_block(double c) {
  const lsdk::ParameterVector one({1, 1}, 1.0);
  return matrix_block({{c}}, one, {1.0}, std::abs(c));
}

/// Largest singular value of W^{1/2} A cw^{-1/2}.
inline double weighted_operator_norm(const Matrix& a, double cw, const std::vector<double>& weights) {
  Eigen::MatrixXd m = to_eigen(a);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) *= std::sqrt(weights[i]);
  m /= std::sqrt(cw);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

}  // namespace test

#endif  // LSDK_TEST_SUPPORT_HPP
