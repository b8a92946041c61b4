#ifndef LSDK_DOPING_HPP
#define LSDK_DOPING_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "lsdk/core.hpp"

namespace lsdk::doping {

/// m × m nodes over the unit square. Row 0 is the contact Γ₀ (ξ₂ = 0),
/// row m-1 the contact Γ₁ (ξ₂ = 1); columns 0 and m-1 are insulated.
/// Corner nodes belong to the contacts.
struct DeviceGrid {
  std::size_t m = 31;
  double mu_n = 1.0;
  /// e^{V_bi} at each Γ₁ node; empty means ≡ 1.
  std::vector<double> contact_weight;
  double x_min = 0.1;
  double x_max = 10.0;

  double spacing() const { return 1.0 / static_cast<double>(m - 1); }
  double cell_weight() const { return spacing() * spacing(); }
  GridShape shape() const { return {m, m}; }
  std::size_t node(std::size_t row, std::size_t col) const { return row * m + col; }
  double contact(std::size_t col) const { return contact_weight.empty() ? 1.0 : contact_weight[col]; }
  ParameterVector constant(double value) const;

  void validate() const;
};

/// Applied potential on Γ₀, one value per column node. Zero on Γ₁ implicitly.
struct VoltageProfile {
  std::vector<double> values;
};

/// Unit bumps |s - s_i| ≤ h centred at s_i = (i + 1/2)/N. Node values are
/// averages of the bump over each node's dual interval.
std::vector<VoltageProfile> make_voltage_profiles(const DeviceGrid& grid, std::size_t n, double h);

/// Nodal potential (m × m, row-major) of the five-point finite-volume scheme.
std::vector<double> solve_pde(const ParameterVector& x, const VoltageProfile& u_bc, const DeviceGrid& grid);

/// Total current μ_n ∫_{Γ₁} e^{V_bi} x ∂u/∂ν through the contact Γ₁.
double current_functional(const std::vector<double>& u, const DeviceGrid& grid, const ParameterVector& x);

double doping_forward(const ParameterVector& x, const VoltageProfile& u_bc, const DeviceGrid& grid);
double doping_derivative(const ParameterVector& x, const ParameterVector& dx, const VoltageProfile& u_bc,
                         const DeviceGrid& grid);
/// F'(x)* r with respect to the weighted X inner product.
ParameterVector doping_adjoint(const ParameterVector& x, double r, const VoltageProfile& u_bc,
                               const DeviceGrid& grid);

OperatorBlock make_doping_block(const DeviceGrid& grid, VoltageProfile profile, double norm_bound = 1.0);

/// Background 1 with a rectangular inclusion of value 0.5 slightly below
/// the centre.
ParameterVector default_true_profile(const DeviceGrid& grid);

// Grid dumps: one grid row per text line, whitespace-separated reals.
void write_grid_dump(const ParameterVector& x, const std::string& path);
ParameterVector read_grid_dump(const std::string& path, double cell_weight);

}  // namespace lsdk::doping

#endif  // LSDK_DOPING_HPP
