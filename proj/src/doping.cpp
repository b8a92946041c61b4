#include "lsdk/doping.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lsdk::doping {

namespace {

// A face connecting nodes a and b, at least one of which is an unknown.
// `trans` is face length over node distance.
struct Face {
  std::size_t a;
  std::size_t b;
  double trans;
  bool contact;  // vertical face touching Γ₁
};

double harmonic(double p, double q) { return 2.0 * p * q / (p + q); }
double harmonic_dp(double p, double q) { return 2.0 * q * q / ((p + q) * (p + q)); }

class Discretization {
 public:
  explicit Discretization(const DeviceGrid& grid) : grid_(grid), m_(grid.m) {
    // Horizontal faces inside the unknown rows.
    for (std::size_t i = 1; i + 1 < m_; ++i) {
      for (std::size_t j = 0; j + 1 < m_; ++j) faces_.push_back({grid.node(i, j), grid.node(i, j + 1), 1.0, false});
    }
    // Vertical faces between rows i and i+1; half length on insulated sides.
    for (std::size_t i = 0; i + 1 < m_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        const double t = (j == 0 || j + 1 == m_) ? 0.5 : 1.0;
        faces_.push_back({grid.node(i, j), grid.node(i + 1, j), t, i + 2 == m_});
      }
    }
  }

  const std::vector<Face>& faces() const { return faces_; }
  std::size_t unknowns() const { return (m_ - 2) * m_; }
  bool is_unknown(std::size_t node) const {
    const std::size_t row = node / m_;
    return row > 0 && row + 1 < m_;
  }
  Eigen::Index unknown_index(std::size_t node) const { return static_cast<Eigen::Index>(node - m_); }
  bool on_gamma0(std::size_t node) const { return node < m_; }

  // Dirichlet values: U on Γ₀, 0 on Γ₁.
  double boundary_value(std::size_t node, const VoltageProfile& u_bc) const {
    return on_gamma0(node) ? u_bc.values[node] : 0.0;
  }

  // Contact coefficient μ_n · e^{V_bi} · trans for a Γ₁ face.
  double contact_coeff(const Face& f) const { return grid_.mu_n * grid_.contact(f.b % m_) * f.trans; }

  Eigen::SparseMatrix<double> assemble(const ParameterVector& x) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * unknowns());
    for (const Face& f : faces_) {
      const double c = f.trans * harmonic(x[f.a], x[f.b]);
      const bool ua = is_unknown(f.a);
      const bool ub = is_unknown(f.b);
      if (ua) trip.emplace_back(unknown_index(f.a), unknown_index(f.a), c);
      if (ub) trip.emplace_back(unknown_index(f.b), unknown_index(f.b), c);
      if (ua && ub) {
        trip.emplace_back(unknown_index(f.a), unknown_index(f.b), -c);
        trip.emplace_back(unknown_index(f.b), unknown_index(f.a), -c);
      }
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(unknowns()), static_cast<Eigen::Index>(unknowns()));
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
  }

  Eigen::VectorXd dirichlet_rhs(const ParameterVector& x, const VoltageProfile& u_bc) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknowns()));
    for (const Face& f : faces_) {
      const double c = f.trans * harmonic(x[f.a], x[f.b]);
      if (is_unknown(f.a) && !is_unknown(f.b)) b[unknown_index(f.a)] += c * boundary_value(f.b, u_bc);
      if (is_unknown(f.b) && !is_unknown(f.a)) b[unknown_index(f.b)] += c * boundary_value(f.a, u_bc);
    }
    return b;
  }

  std::vector<double> expand(const Eigen::VectorXd& interior, const VoltageProfile& u_bc) const {
    std::vector<double> u(m_ * m_, 0.0);
    for (std::size_t n = 0; n < m_ * m_; ++n) {
      u[n] = is_unknown(n) ? interior[unknown_index(n)] : boundary_value(n, u_bc);
    }
    return u;
  }

 private:
  const DeviceGrid& grid_;
  std::size_t m_;
  std::vector<Face> faces_;
};

void check_domain(const ParameterVector& x, const DeviceGrid& grid) {
  if (x.shape() != grid.shape()) throw DimensionError("parameter does not live on the device grid");
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (!(x[n] >= grid.x_min)) {
      std::ostringstream msg;
      msg << "parameter value " << x[n] << " at node " << n << " is below x_min = " << grid.x_min;
      throw DomainError(msg.str());
    }
  }
}

void check_profile(const VoltageProfile& u_bc, const DeviceGrid& grid) {
  if (u_bc.values.size() != grid.m) throw DimensionError("voltage profile length differs from grid width");
}

class Factorized {
 public:
  Factorized(const Discretization& disc, const ParameterVector& x) : a_(disc.assemble(x)) {
    llt_.compute(a_);
    if (llt_.info() != Eigen::Success) {
      throw SolverFailure("Cholesky factorization of the device matrix failed",
                          std::numeric_limits<double>::quiet_NaN());
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd u = llt_.solve(b);
    const double res = (a_ * u - b).norm();
    const double scale = b.norm();
    if (llt_.info() != Eigen::Success || !std::isfinite(res) || res > 1e-9 * (scale > 0 ? scale : 1.0)) {
      throw SolverFailure("device linear solve did not converge", res);
    }
    return u;
  }

 private:
  Eigen::SparseMatrix<double> a_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

}  // namespace

ParameterVector DeviceGrid::constant(double value) const {
  return ParameterVector(shape(), cell_weight(), std::vector<double>(m * m, value));
}

void DeviceGrid::validate() const {
  if (m < 5) throw DimensionError("device grid needs m >= 5");
  if (!(mu_n > 0.0)) throw ConfigError("mu_n must be positive");
  if (!contact_weight.empty()) {
    if (contact_weight.size() != m) throw DimensionError("contact weight needs one value per column");
    for (double c : contact_weight) {
      if (!(c > 0.0)) throw ConfigError("contact weight must be positive");
    }
  }
  if (!(x_min > 0.0 && x_min < x_max)) throw ConfigError("need 0 < x_min < x_max");
}

std::vector<VoltageProfile> make_voltage_profiles(const DeviceGrid& grid, std::size_t n, double h) {
  grid.validate();
  if (n == 0) throw ConfigError("need at least one voltage profile");
  if (!(h > 0.0 && h < 0.5)) throw ConfigError("bump half-width h must lie in (0, 1/2)");
  const double spacing = 1.0 / static_cast<double>(n);
  if (n > 1 && h >= spacing / 2.0) warn("voltage bumps overlap (h >= half the centre spacing)");

  const double hh = grid.spacing();
  std::vector<VoltageProfile> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double centre = (static_cast<double>(i) + 0.5) * spacing;
    const double lo = centre - h;
    const double hi = centre + h;
    VoltageProfile p{std::vector<double>(grid.m, 0.0)};
    for (std::size_t j = 0; j < grid.m; ++j) {
      const double s = static_cast<double>(j) * hh;
      const double cell_lo = std::max(0.0, s - hh / 2);
      const double cell_hi = std::min(1.0, s + hh / 2);
      const double overlap = std::max(0.0, std::min(cell_hi, hi) - std::max(cell_lo, lo));
      p.values[j] = overlap / (cell_hi - cell_lo);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> solve_pde(const ParameterVector& x, const VoltageProfile& u_bc, const DeviceGrid& grid) {
  grid.validate();
  check_domain(x, grid);
  check_profile(u_bc, grid);
  const Discretization disc(grid);
  const Factorized fac(disc, x);
  return disc.expand(fac.solve(disc.dirichlet_rhs(x, u_bc)), u_bc);
}

double current_functional(const std::vector<double>& u, const DeviceGrid& grid, const ParameterVector& x) {
  if (u.size() != grid.m * grid.m) throw DimensionError("potential does not live on the device grid");
  const Discretization disc(grid);
  double current = 0.0;
  for (const Face& f : disc.faces()) {
    if (!f.contact) continue;
    // Outward normal at Γ₁ points from row m-2 (a) to row m-1 (b).
    current += disc.contact_coeff(f) * harmonic(x[f.a], x[f.b]) * (u[f.b] - u[f.a]);
  }
  return current;
}

double doping_forward(const ParameterVector& x, const VoltageProfile& u_bc, const DeviceGrid& grid) {
  return current_functional(solve_pde(x, u_bc, grid), grid, x);
}

double doping_derivative(const ParameterVector& x, const ParameterVector& dx, const VoltageProfile& u_bc,
                         const DeviceGrid& grid) {
  grid.validate();
  check_domain(x, grid);
  check_profile(u_bc, grid);
  if (dx.shape() != grid.shape()) throw DimensionError("direction does not live on the device grid");
  const Discretization disc(grid);
  const Factorized fac(disc, x);
  const std::vector<double> u = disc.expand(fac.solve(disc.dirichlet_rhs(x, u_bc)), u_bc);

  // Linearized equation: A du = -(∂R/∂x · dx) u, du = 0 on both contacts.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(disc.unknowns()));
  double direct = 0.0;
  for (const Face& f : disc.faces()) {
    const double da = harmonic_dp(x[f.a], x[f.b]) * dx[f.a] + harmonic_dp(x[f.b], x[f.a]) * dx[f.b];
    const double jump = u[f.a] - u[f.b];
    if (disc.is_unknown(f.a)) rhs[disc.unknown_index(f.a)] -= f.trans * da * jump;
    if (disc.is_unknown(f.b)) rhs[disc.unknown_index(f.b)] += f.trans * da * jump;
    if (f.contact) direct -= disc.contact_coeff(f) * da * jump;
  }
  const Eigen::VectorXd du = fac.solve(rhs);
  double through_state = 0.0;
  for (const Face& f : disc.faces()) {
    if (!f.contact) continue;
    through_state -= disc.contact_coeff(f) * harmonic(x[f.a], x[f.b]) * du[disc.unknown_index(f.a)];
  }
  return direct + through_state;
}

ParameterVector doping_adjoint(const ParameterVector& x, double r, const VoltageProfile& u_bc,
                               const DeviceGrid& grid) {
  grid.validate();
  check_domain(x, grid);
  check_profile(u_bc, grid);
  const Discretization disc(grid);
  const Factorized fac(disc, x);
  const std::vector<double> u = disc.expand(fac.solve(disc.dirichlet_rhs(x, u_bc)), u_bc);

  // Adjoint state: A λ = (∂J/∂u)ᵀ; A is symmetric.
  Eigen::VectorXd dj_du = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(disc.unknowns()));
  for (const Face& f : disc.faces()) {
    if (!f.contact) continue;
    dj_du[disc.unknown_index(f.a)] -= disc.contact_coeff(f) * harmonic(x[f.a], x[f.b]);
  }
  const Eigen::VectorXd lambda = fac.solve(dj_du);
  auto lam = [&](std::size_t node) { return disc.is_unknown(node) ? lambda[disc.unknown_index(node)] : 0.0; };

  // Euclidean gradient G = ∂J/∂x - (∂R/∂x)ᵀ λ.
  ParameterVector g = x.zeros_like();
  for (const Face& f : disc.faces()) {
    const double jump = u[f.a] - u[f.b];
    double weight = -f.trans * (lam(f.a) - lam(f.b)) * jump;
    if (f.contact) weight += disc.contact_coeff(f) * (u[f.b] - u[f.a]);
    g[f.a] += weight * harmonic_dp(x[f.a], x[f.b]);
    g[f.b] += weight * harmonic_dp(x[f.b], x[f.a]);
  }
  g.scale(r / x.cell_weight());
  return g;
}

OperatorBlock make_doping_block(const DeviceGrid& grid, VoltageProfile profile, double norm_bound) {
  grid.validate();
  check_profile(profile, grid);
  OperatorBlock block;
  const std::vector<double> unit_weight{1.0};
  block.apply = [grid, profile, unit_weight](const ParameterVector& x) {
    return DataBlock({doping_forward(x, profile, grid)}, unit_weight);
  };
  block.derivative_apply = [grid, profile, unit_weight](const ParameterVector& x, const ParameterVector& dx) {
    return DataBlock({doping_derivative(x, dx, profile, grid)}, unit_weight);
  };
  block.adjoint_derivative_apply = [grid, profile](const ParameterVector& x, const DataBlock& r) {
    if (r.size() != 1) throw DimensionError("doping data blocks are scalars");
    return doping_adjoint(x, r[0], profile, grid);
  };
  block.norm_bound = norm_bound;
  block.is_linear = false;
  block.adjoint_tolerance = 1e-8;
  block.data_template = DataBlock(unit_weight);
  return block;
}

ParameterVector default_true_profile(const DeviceGrid& grid) {
  ParameterVector x = grid.constant(1.0);
  const double hh = grid.spacing();
  for (std::size_t i = 0; i < grid.m; ++i) {
    for (std::size_t j = 0; j < grid.m; ++j) {
      const double s = static_cast<double>(j) * hh;
      const double t = static_cast<double>(i) * hh;
      if (s >= 0.3 && s <= 0.7 && t >= 0.2 && t <= 0.45) x.at(i, j) = 0.5;
    }
  }
  return x;
}

void write_grid_dump(const ParameterVector& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write grid dump " + path);
  char buf[64];
  for (std::size_t i = 0; i < x.shape().rows; ++i) {
    for (std::size_t j = 0; j < x.shape().cols; ++j) {
      auto res = std::to_chars(buf, buf + sizeof buf, x.at(i, j));
      if (j) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing grid dump " + path);
}

ParameterVector read_grid_dump(const std::string& path, double cell_weight) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid dump " + path);
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::size_t count = 0;
    double v;
    while (ls >> v) {
      values.push_back(v);
      ++count;
    }
    if (!ls.eof()) throw ConfigError("grid dump " + path + ": malformed number on row " + std::to_string(rows + 1));
    if (count == 0) continue;
    if (cols == 0) cols = count;
    if (count != cols) throw ConfigError("grid dump " + path + ": ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw ConfigError("grid dump " + path + " is empty");
  return ParameterVector({rows, cols}, cell_weight, std::move(values));
}

}  // namespace lsdk::doping
