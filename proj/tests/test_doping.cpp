#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "lsdk/doping.hpp"
#include "test_support.hpp"

using namespace lsdk;
using namespace lsdk::doping;

namespace {

DeviceGrid grid_of_size(std::size_t m) {
  DeviceGrid g;
  g.m = m;
  return g;
}

ParameterVector smooth_profile(const DeviceGrid& g) {
  ParameterVector x = g.constant(1.0);
  const double h = g.spacing();
  for (std::size_t i = 0; i < g.m; ++i)
    for (std::size_t j = 0; j < g.m; ++j) {
      const double s = j * h, t = i * h;
      x.at(i, j) = 1.0 + 0.4 * std::sin(std::numbers::pi * s) * std::cos(2.0 * std::numbers::pi * t);
    }
  return x;
}

VoltageProfile uniform(const DeviceGrid& g, double v) { return {std::vector<double>(g.m, v)}; }

// Node-by-node assembly of the same five-point scheme as a dense system:
// each unknown node balances fluxes to its four neighbours, insulated
// columns carry half-length vertical faces, contact rows are identity rows.
Eigen::VectorXd dense_potential(const ParameterVector& x, const VoltageProfile& u, const DeviceGrid& g) {
  const std::size_t m = g.m;
  const auto n = static_cast<Eigen::Index>(m * m);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  auto id = [m](std::size_t r, std::size_t c) { return static_cast<Eigen::Index>(r * m + c); };
  auto mean = [](double p, double q) { return 2.0 / (1.0 / p + 1.0 / q); };
  for (std::size_t c = 0; c < m; ++c) {
    a(id(0, c), id(0, c)) = 1.0;
    b(id(0, c)) = u.values[c];
    a(id(m - 1, c), id(m - 1, c)) = 1.0;
  }
  for (std::size_t r = 1; r + 1 < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const double vertical = (c == 0 || c == m - 1) ? 0.5 : 1.0;
      auto couple = [&](std::size_t rr, std::size_t cc, double len) {
        const double k = len * mean(x.at(r, c), x.at(rr, cc));
        a(id(r, c), id(r, c)) += k;
        a(id(r, c), id(rr, cc)) -= k;
      };
      couple(r - 1, c, vertical);
      couple(r + 1, c, vertical);
      if (c > 0) couple(r, c - 1, 1.0);
      if (c + 1 < m) couple(r, c + 1, 1.0);
    }
  }
  return a.partialPivLu().solve(b);
}

}  // namespace

TEST_CASE("constant coefficient with constant voltage gives the linear potential") {
  const DeviceGrid g = grid_of_size(17);
  for (double c : {1.0, 0.3, 7.0}) {
    const std::vector<double> u = solve_pde(g.constant(c), uniform(g, 1.0), g);
    for (std::size_t i = 0; i < g.m; ++i)
      for (std::size_t j = 0; j < g.m; ++j) CHECK(std::abs(u[g.node(i, j)] - (1.0 - i * g.spacing())) <= 1e-10);
  }
}

TEST_CASE("potential is invariant under scaling of the coefficient") {
  const DeviceGrid g = grid_of_size(17);
  const auto profiles = make_voltage_profiles(g, 3, 0.1);
  const ParameterVector x = smooth_profile(g);
  ParameterVector x3 = x;
  x3.scale(3.0);
  const auto u1 = solve_pde(x, profiles[1], g);
  const auto u3 = solve_pde(x3, profiles[1], g);
  for (std::size_t n = 0; n < u1.size(); ++n) CHECK(std::abs(u1[n] - u3[n]) <= 1e-12);
  CHECK(doping_forward(x3, profiles[1], g) == doctest::Approx(3.0 * doping_forward(x, profiles[1], g)).epsilon(1e-12));
}

TEST_CASE("sparse solve agrees with an independently assembled dense system") {
  const DeviceGrid g = grid_of_size(17);
  Rng rng(4);
  ParameterVector x = g.constant(1.0);
  for (double& v : x.values()) v = rng.uniform(0.5, 2.0);
  for (const auto& p : make_voltage_profiles(g, 4, 0.1)) {
    const std::vector<double> u = solve_pde(x, p, g);
    const Eigen::VectorXd oracle = dense_potential(x, p, g);
    for (std::size_t n = 0; n < u.size(); ++n) CHECK(std::abs(u[n] - oracle(static_cast<Eigen::Index>(n))) <= 1e-10);
  }
}

TEST_CASE("discrete maximum principle") {
  const DeviceGrid g = grid_of_size(21);
  const ParameterVector x = smooth_profile(g);
  for (const auto& p : make_voltage_profiles(g, 5, 0.05)) {
    const auto u = solve_pde(x, p, g);
    const double top = *std::max_element(p.values.begin(), p.values.end());
    for (double v : u) {
      CHECK(v >= -1e-12);
      CHECK(v <= top + 1e-12);
    }
  }
}

TEST_CASE("current functional examples") {
  DeviceGrid g = grid_of_size(17);
  g.mu_n = 2.5;
  CHECK(doping_forward(g.constant(1.0), uniform(g, 1.0), g) == doctest::Approx(-2.5).epsilon(1e-10));
  CHECK(doping_forward(g.constant(1.0), uniform(g, 0.0), g) == 0.0);
  CHECK(doping_forward(smooth_profile(g), uniform(g, 0.0), g) == 0.0);
}

TEST_CASE("current converges under grid refinement") {
  const DeviceGrid coarse = grid_of_size(33);
  const DeviceGrid fine = grid_of_size(129);
  const auto pc = make_voltage_profiles(coarse, 3, 0.1);
  const auto pf = make_voltage_profiles(fine, 3, 0.1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double jc = doping_forward(smooth_profile(coarse), pc[i], coarse);
    const double jf = doping_forward(smooth_profile(fine), pf[i], fine);
    CHECK(std::abs(jc - jf) <= 0.02 * std::abs(jf));
  }
}

TEST_CASE("forward map is deterministic") {
  const DeviceGrid g = grid_of_size(17);
  const auto p = make_voltage_profiles(g, 2, 0.1)[0];
  const ParameterVector x = default_true_profile(g);
  CHECK(doping_forward(x, p, g) == doping_forward(x, p, g));
}

TEST_CASE("derivative matches central differences and is linear") {
  const DeviceGrid g = grid_of_size(17);
  const ParameterVector x = smooth_profile(g);
  const auto profiles = make_voltage_profiles(g, 5, 1.0 / 32.0);
  Rng rng(8);
  for (int trial = 0; trial < 4; ++trial) {
    const auto& p = profiles[static_cast<std::size_t>(trial) % profiles.size()];
    ParameterVector dx = x.zeros_like();
    rng.fill_normal(dx.values());
    const double lin = doping_derivative(x, dx, p, g);
    double best = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
      ParameterVector xp = x, xm = x;
      xp.axpy(eps, dx);
      xm.axpy(-eps, dx);
      const double fd = (doping_forward(xp, p, g) - doping_forward(xm, p, g)) / (2 * eps);
      best = std::min(best, std::abs(fd - lin) / std::abs(lin));
    }
    CHECK(best <= 5e-4);

    ParameterVector dy = x.zeros_like();
    rng.fill_normal(dy.values());
    ParameterVector comb = dx;
    comb.scale(2.0);
    comb.axpy(-3.0, dy);
    const double expect = 2.0 * lin - 3.0 * doping_derivative(x, dy, p, g);
    CHECK(doping_derivative(x, comb, p, g) == doctest::Approx(expect).epsilon(1e-10));
  }
  CHECK(doping_derivative(x, x.zeros_like(), profiles[0], g) == 0.0);
}

TEST_CASE("adjoint identity, zero residual and linear scaling") {
  const DeviceGrid g = grid_of_size(17);
  const ParameterVector x = default_true_profile(g);
  for (const auto& p : make_voltage_profiles(g, 3, 1.0 / 32.0)) {
    const OperatorBlock b = make_doping_block(g, p);
    const AdjointReport rep = validate_adjoint(b, x, 20, 5, 1e-8);
    CHECK(rep.pass);
    CHECK(rep.max_relative_defect <= 1e-8);

    const ParameterVector zero = doping_adjoint(x, 0.0, p, g);
    for (double v : zero.values()) CHECK(v == 0.0);
    const ParameterVector one = doping_adjoint(x, 1.0, p, g);
    const ParameterVector four = doping_adjoint(x, 4.0, p, g);
    for (std::size_t n = 0; n < x.size(); ++n) CHECK(four[n] == doctest::Approx(4.0 * one[n]).epsilon(1e-14));
  }
}

TEST_CASE("voltage profiles") {
  const DeviceGrid g = grid_of_size(129);
  const double h = g.spacing();
  auto mass = [&](const VoltageProfile& p) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.m; ++j) s += p.values[j] * ((j == 0 || j + 1 == g.m) ? h / 2 : h);
    return s;
  };

  const auto one = make_voltage_profiles(g, 1, 0.1);
  REQUIRE(one.size() == 1);
  CHECK(mass(one[0]) == doctest::Approx(0.2).epsilon(1e-12));
  for (std::size_t j = 0; j < g.m; ++j) CHECK(one[0].values[j] == doctest::Approx(one[0].values[g.m - 1 - j]));
  CHECK(one[0].values[g.m / 2] == 1.0);

  const auto eleven = make_voltage_profiles(g, 11, 1.0 / 32.0);
  REQUIRE(eleven.size() == 11);
  for (std::size_t j = 0; j < g.m; ++j) {
    int active = 0;
    for (const auto& p : eleven) active += p.values[j] > 0.0;
    CHECK(active <= 1);
  }
  for (const auto& p : eleven) CHECK(mass(p) == doctest::Approx(1.0 / 16.0).epsilon(1e-12));

  std::vector<std::string> warnings;
  set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  make_voltage_profiles(g, 11, 0.1);
  set_warning_sink({});
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(make_voltage_profiles(g, 0, 0.1), ConfigError);
}

TEST_CASE("parameters below the admissible floor are rejected") {
  const DeviceGrid g = grid_of_size(9);
  ParameterVector x = g.constant(1.0);
  x.at(4, 4) = 0.05;
  CHECK_THROWS_AS(solve_pde(x, uniform(g, 1.0), g), DomainError);
  CHECK_THROWS_AS(solve_pde(ParameterVector({5, 5}, 1.0), uniform(g, 1.0), g), DimensionError);
  CHECK_THROWS_AS(solve_pde(g.constant(1.0), VoltageProfile{{1.0}}, g), DimensionError);
  CHECK_THROWS_AS(grid_of_size(3).validate(), DimensionError);
}

TEST_CASE("grid dumps round-trip exactly") {
  const DeviceGrid g = grid_of_size(11);
  ParameterVector x = g.constant(1.0);
  Rng rng(2);
  for (double& v : x.values()) v = rng.uniform(0.1, 10.0);
  const auto path = std::filesystem::temp_directory_path() / "lsdk_grid_dump_test.txt";
  write_grid_dump(x, path.string());
  const ParameterVector back = read_grid_dump(path.string(), g.cell_weight());
  std::filesystem::remove(path);
  CHECK(back.shape() == x.shape());
  for (std::size_t n = 0; n < x.size(); ++n) CHECK(back[n] == x[n]);
  CHECK_THROWS_AS(read_grid_dump("/nonexistent/dump.txt", 1.0), ConfigError);
}
