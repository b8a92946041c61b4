#include "lsdk/radon.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lsdk::radon {

namespace {

constexpr double kPi = std::numbers::pi;

struct Stencil {
  std::size_t index[4];
  double weight[4];
  int count = 0;
};

// Bilinear stencil of point p on the pixel-centre lattice, restricted to
// pixels whose centre lies in the unit disc.
class Interpolator {
 public:
  explicit Interpolator(const ImageGrid& grid) : grid_(grid), mask_(grid.rows * grid.cols) {
    for (std::size_t r = 0; r < grid.rows; ++r) {
      for (std::size_t c = 0; c < grid.cols; ++c) mask_[r * grid.cols + c] = grid.inside_disc(r, c);
    }
    reach_sq_ = 1.0 + 2.0 * std::hypot(grid.dx(), grid.dy());
    reach_sq_ *= reach_sq_;
  }

  bool stencil(Point p, Stencil& s) const {
    s.count = 0;
    if (p.x * p.x + p.y * p.y > reach_sq_) return false;
    const double u = (p.x + 1.0) / grid_.dx() - 0.5;
    const double v = (1.0 - p.y) / grid_.dy() - 0.5;
    const double uf = std::floor(u);
    const double vf = std::floor(v);
    const double fu = u - uf;
    const double fv = v - vf;
    const long c0 = static_cast<long>(uf);
    const long r0 = static_cast<long>(vf);
    const long rows = static_cast<long>(grid_.rows);
    const long cols = static_cast<long>(grid_.cols);
    const long rr[4] = {r0, r0, r0 + 1, r0 + 1};
    const long cc[4] = {c0, c0 + 1, c0, c0 + 1};
    const double ww[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
    for (int q = 0; q < 4; ++q) {
      if (rr[q] < 0 || rr[q] >= rows || cc[q] < 0 || cc[q] >= cols) continue;
      const std::size_t idx = static_cast<std::size_t>(rr[q]) * grid_.cols + static_cast<std::size_t>(cc[q]);
      if (!mask_[idx]) continue;
      s.index[s.count] = idx;
      s.weight[s.count] = ww[q];
      ++s.count;
    }
    return s.count > 0;
  }

 private:
  ImageGrid grid_;
  std::vector<char> mask_;
  double reach_sq_;
};

struct AngularTable {
  std::vector<double> cos_t;
  std::vector<double> sin_t;
};

AngularTable angular_table(std::size_t n_sigma) {
  AngularTable t;
  t.cos_t.resize(n_sigma);
  t.sin_t.resize(n_sigma);
  for (std::size_t k = 0; k < n_sigma; ++k) {
    const double theta = 2.0 * kPi * (static_cast<double>(k) + 0.5) / static_cast<double>(n_sigma);
    t.cos_t[k] = std::cos(theta);
    t.sin_t[k] = std::sin(theta);
  }
  return t;
}

double quadrature_factor(std::size_t n_sigma) {
  return (2.0 * kPi / static_cast<double>(n_sigma)) / std::sqrt(kPi);
}

void check_index(const DetectorSet& det, std::size_t i) {
  if (i >= det.size()) {
    throw DimensionError("detector index " + std::to_string(i) + " out of range");
  }
}

}  // namespace

// Detectors --------------------------------------------------------------------

std::vector<double> DetectorSet::data_weights() const {
  const std::size_t n_t = radial_grid.size();
  std::vector<double> w(n_t);
  const double dt = 2.0 / static_cast<double>(n_t - 1);
  for (std::size_t j = 0; j < n_t; ++j) {
    const double trap = (j == 0 || j + 1 == n_t) ? 0.5 * dt : dt;
    w[j] = trap * radial_grid[j];
  }
  return w;
}

DetectorSet make_detectors(std::size_t n, std::size_t n_t, std::size_t n_sigma) {
  if (n < 2) throw DimensionError("need at least two detectors");
  if (n_t < 2) throw DimensionError("need at least two radial samples");
  if (n_sigma < 4) throw DimensionError("need at least four angular nodes");
  DetectorSet det;
  det.centers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = kPi * static_cast<double>(i) / static_cast<double>(n - 1);
    det.centers.push_back({std::sin(phi), std::cos(phi)});
  }
  // Endpoints exactly on the axis.
  det.centers.front() = {0.0, 1.0};
  det.centers.back() = {0.0, -1.0};
  det.radial_grid.resize(n_t);
  for (std::size_t j = 0; j < n_t; ++j) {
    det.radial_grid[j] = 2.0 * static_cast<double>(j) / static_cast<double>(n_t - 1);
  }
  det.radial_grid.back() = 2.0;
  det.angular_count = n_sigma;
  return det;
}

// Grid -------------------------------------------------------------------------

Point ImageGrid::center(std::size_t row, std::size_t col) const {
  return {-1.0 + (static_cast<double>(col) + 0.5) * dx(), 1.0 - (static_cast<double>(row) + 0.5) * dy()};
}

bool ImageGrid::inside_disc(std::size_t row, std::size_t col) const {
  const Point p = center(row, col);
  return p.x * p.x + p.y * p.y <= 1.0;
}

ImageGrid grid_of(const ParameterVector& x) { return {x.shape().rows, x.shape().cols}; }

// Operator ---------------------------------------------------------------------

DataBlock radon_forward(const ParameterVector& x, const DetectorSet& det, std::size_t i) {
  check_index(det, i);
  const ImageGrid grid = grid_of(x);
  const Interpolator interp(grid);
  const AngularTable ang = angular_table(det.angular_count);
  const double factor = quadrature_factor(det.angular_count);
  const Point xi = det.centers[i];
  const auto xv = x.values();

  DataBlock out(det.data_weights());
  Stencil s;
  for (std::size_t j = 0; j < det.radial_grid.size(); ++j) {
    const double t = det.radial_grid[j];
    double sum = 0.0;
    for (std::size_t k = 0; k < det.angular_count; ++k) {
      if (!interp.stencil({xi.x + t * ang.cos_t[k], xi.y + t * ang.sin_t[k]}, s)) continue;
      for (int q = 0; q < s.count; ++q) sum += s.weight[q] * xv[s.index[q]];
    }
    out[j] = factor * sum;
  }
  return out;
}

ParameterVector radon_adjoint(const DataBlock& y, const DetectorSet& det, std::size_t i,
                              const ImageGrid& grid) {
  check_index(det, i);
  if (y.size() != det.radial_grid.size()) throw DimensionError("data block does not match radial grid");
  const Interpolator interp(grid);
  const AngularTable ang = angular_table(det.angular_count);
  const double factor = quadrature_factor(det.angular_count);
  const Point xi = det.centers[i];
  const auto w = y.weights();

  ParameterVector out = grid.zeros();
  auto ov = out.values();
  const double inv_cell = 1.0 / grid.cell_area();
  Stencil s;
  for (std::size_t j = 0; j < det.radial_grid.size(); ++j) {
    const double coeff = w[j] * y[j] * factor * inv_cell;
    if (coeff == 0.0) continue;
    const double t = det.radial_grid[j];
    for (std::size_t k = 0; k < det.angular_count; ++k) {
      if (!interp.stencil({xi.x + t * ang.cos_t[k], xi.y + t * ang.sin_t[k]}, s)) continue;
      for (int q = 0; q < s.count; ++q) ov[s.index[q]] += coeff * s.weight[q];
    }
  }
  return out;
}

ParameterVector radon_adjoint_analytic(const DataBlock& y, const DetectorSet& det, std::size_t i,
                                       const ImageGrid& grid) {
  check_index(det, i);
  const Point xi = det.centers[i];
  const std::size_t n_t = det.radial_grid.size();
  const double dt = 2.0 / static_cast<double>(n_t - 1);
  ParameterVector out = grid.zeros();
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      if (!grid.inside_disc(r, c)) continue;
      const Point p = grid.center(r, c);
      const double dist = std::hypot(p.x - xi.x, p.y - xi.y);
      const double pos = std::min(dist / dt, static_cast<double>(n_t - 1));
      const std::size_t j0 = std::min(static_cast<std::size_t>(pos), n_t - 2);
      const double f = pos - static_cast<double>(j0);
      out.at(r, c) = ((1.0 - f) * y[j0] + f * y[j0 + 1]) / std::sqrt(kPi);
    }
  }
  return out;
}

OperatorBlock make_radon_block(const DetectorSet& det, std::size_t i, const ImageGrid& grid,
                               double norm_bound) {
  check_index(det, i);
  return make_linear_block([det, i](const ParameterVector& x) { return radon_forward(x, det, i); },
                           [det, i, grid](const DataBlock& y) { return radon_adjoint(y, det, i, grid); },
                           DataBlock(det.data_weights()), norm_bound, 1e-10);
}

// Phantoms ---------------------------------------------------------------------

namespace {

double shape_value(const Shape& shape, Point p) {
  return std::visit(
      [p](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        const double dx = p.x - s.center.x;
        const double dy = p.y - s.center.y;
        if constexpr (std::is_same_v<T, Disc>) {
          return dx * dx + dy * dy <= s.radius * s.radius ? s.amplitude : 0.0;
        } else if constexpr (std::is_same_v<T, Ellipse>) {
          const double a = s.angle_deg * kPi / 180.0;
          const double u = std::cos(a) * dx + std::sin(a) * dy;
          const double v = -std::sin(a) * dx + std::cos(a) * dy;
          const double q = (u * u) / (s.semi_a * s.semi_a) + (v * v) / (s.semi_b * s.semi_b);
          return q <= 1.0 ? s.amplitude : 0.0;
        } else {
          return s.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s.width * s.width));
        }
      },
      shape);
}

}  // namespace

ParameterVector make_phantom(const PhantomSpec& spec) {
  const ImageGrid& grid = spec.grid;
  if (grid.rows == 0 || grid.cols == 0) throw DimensionError("phantom grid is empty");
  ParameterVector x = grid.zeros();
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      if (!grid.inside_disc(r, c)) continue;
      const Point p = grid.center(r, c);
      double v = 0.0;
      for (const Shape& s : spec.shapes) v += shape_value(s, p);
      x.at(r, c) = v;
    }
  }
  return x;
}

std::vector<Shape> parse_scene(const std::string& text) {
  std::vector<Shape> shapes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError("scene line " + std::to_string(lineno) + ": " + why);
    };
    std::vector<double> v;
    double d;
    while (ls >> d) v.push_back(d);
    if (!ls.eof()) fail("malformed number");
    for (double e : v) {
      if (!std::isfinite(e)) fail("non-finite value");
    }
    if (kind == "disc") {
      if (v.size() != 4) fail("disc expects: cx cy r amp");
      if (!(v[2] > 0)) fail("disc radius must be positive");
      shapes.push_back(Disc{{v[0], v[1]}, v[2], v[3]});
    } else if (kind == "ellipse") {
      if (v.size() != 6) fail("ellipse expects: cx cy a b angle_deg amp");
      if (!(v[2] > 0 && v[3] > 0)) fail("ellipse semi-axes must be positive");
      shapes.push_back(Ellipse{{v[0], v[1]}, v[2], v[3], v[4], v[5]});
    } else if (kind == "gaussian") {
      if (v.size() != 4) fail("gaussian expects: cx cy sigma amp");
      if (!(v[2] > 0)) fail("gaussian width must be positive");
      shapes.push_back(Gaussian{{v[0], v[1]}, v[2], v[3]});
    } else {
      fail("unknown shape '" + kind + "'");
    }
  }
  return shapes;
}

std::vector<Shape> load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

std::vector<Shape> default_scene() {
  return {
      Disc{{0.35, 0.30}, 0.22, 1.0},
      Disc{{0.05, 0.45}, 0.15, 1.5},
      Disc{{0.25, -0.40}, 0.20, 0.8},
      Ellipse{{-0.10, -0.05}, 0.30, 0.12, 80.0, 0.6},
      Gaussian{{0.55, -0.05}, 0.12, 1.2},
  };
}

std::vector<DataBlock> synthesize_data(const PhantomSpec& spec, const DetectorSet& det,
                                       std::size_t refinement) {
  if (refinement == 0) throw DimensionError("refinement must be >= 1");
  const std::size_t n_t = det.radial_grid.size();
  const PhantomSpec fine_spec{spec.shapes, {spec.grid.rows * refinement, spec.grid.cols * refinement}};
  const ParameterVector fine = make_phantom(fine_spec);
  const DetectorSet fine_det =
      make_detectors(det.size(), (n_t - 1) * refinement + 1, det.angular_count * refinement);
  std::vector<DataBlock> data;
  data.reserve(det.size());
  const std::vector<double> weights = det.data_weights();
  for (std::size_t i = 0; i < det.size(); ++i) {
    const DataBlock fine_y = radon_forward(fine, fine_det, i);
    std::vector<double> values(n_t);
    for (std::size_t j = 0; j < n_t; ++j) values[j] = fine_y[j * refinement];
    data.emplace_back(std::move(values), weights);
  }
  return data;
}

NoisyData add_noise(const std::vector<DataBlock>& y, double rel_level, std::uint64_t seed) {
  if (!(rel_level >= 0.0)) throw ConfigError("noise level must be >= 0");
  NoisyData out;
  out.y_delta.reserve(y.size());
  out.delta.reserve(y.size());
  const Rng base(seed);
  for (std::size_t i = 0; i < y.size(); ++i) {
    DataBlock yd = y[i];
    if (rel_level == 0.0) {
      out.y_delta.push_back(std::move(yd));
      out.delta.push_back(0.0);
      continue;
    }
    Rng rng = base.split(i);
    DataBlock noise = y[i].zeros_like();
    rng.fill_normal(noise.values());
    const double noise_norm = norm(noise);
    if (!(noise_norm > 0.0)) throw DegenerateInputError("noise draw has zero weighted norm");
    double target = rel_level * norm(y[i]);
    if (target == 0.0) {
      warn("block " + std::to_string(i) + " has zero data; adding absolute noise of size " +
           std::to_string(rel_level));
      target = rel_level;
    }
    yd.axpy(target / noise_norm, noise);
    out.delta.push_back(norm(yd - y[i]));
    out.y_delta.push_back(std::move(yd));
  }
  return out;
}

}  // namespace lsdk::radon
