#ifndef LSDK_RADON_HPP
#define LSDK_RADON_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lsdk/core.hpp"

namespace lsdk::radon {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Detector centres on the right half of the unit circle plus the radial
/// and angular sampling shared by every block.
struct DetectorSet {
  std::vector<Point> centers;
  std::vector<double> radial_grid;
  std::size_t angular_count = 0;

  std::size_t size() const { return centers.size(); }
  /// Trapezoid weights on [0, 2] times t_j.
  std::vector<double> data_weights() const;
};

DetectorSet make_detectors(std::size_t n, std::size_t n_t, std::size_t n_sigma);

/// Pixel grid over [-1, 1]². Row 0 is the top row (y = 1 side).
struct ImageGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;

  GridShape shape() const { return {rows, cols}; }
  double dx() const { return 2.0 / static_cast<double>(cols); }
  double dy() const { return 2.0 / static_cast<double>(rows); }
  double cell_area() const { return dx() * dy(); }
  Point center(std::size_t row, std::size_t col) const;
  bool inside_disc(std::size_t row, std::size_t col) const;
  ParameterVector zeros() const { return ParameterVector(shape(), cell_area()); }
};

ImageGrid grid_of(const ParameterVector& x);

DataBlock radon_forward(const ParameterVector& x, const DetectorSet& det, std::size_t i);
ParameterVector radon_adjoint(const DataBlock& y, const DetectorSet& det, std::size_t i,
                              const ImageGrid& grid);

/// Continuous adjoint y(|ξ_i - ξ|)/√π sampled at pixel centres, with y
/// linearly interpolated on the radial grid. Cross-check only.
ParameterVector radon_adjoint_analytic(const DataBlock& y, const DetectorSet& det, std::size_t i,
                                       const ImageGrid& grid);

OperatorBlock make_radon_block(const DetectorSet& det, std::size_t i, const ImageGrid& grid,
                               double norm_bound = 1.0);

// Phantoms --------------------------------------------------------------------

struct Disc {
  Point center;
  double radius = 0.0;
  double amplitude = 0.0;
};

struct Ellipse {
  Point center;
  double semi_a = 0.0;
  double semi_b = 0.0;
  double angle_deg = 0.0;
  double amplitude = 0.0;
};

struct Gaussian {
  Point center;
  double width = 0.0;
  double amplitude = 0.0;
};

using Shape = std::variant<Disc, Ellipse, Gaussian>;

struct PhantomSpec {
  std::vector<Shape> shapes;
  ImageGrid grid;
};

ParameterVector make_phantom(const PhantomSpec& spec);

/// Scene text: `disc cx cy r amp`, `ellipse cx cy a b angle_deg amp`,
/// `gaussian cx cy sigma amp`, `#` comments.
std::vector<Shape> parse_scene(const std::string& text);
std::vector<Shape> load_scene(const std::string& path);
std::vector<Shape> default_scene();

/// Exact data from a grid (and angular sampling) refined by `refinement`,
/// restricted back to the working radial grid.
std::vector<DataBlock> synthesize_data(const PhantomSpec& spec, const DetectorSet& det,
                                       std::size_t refinement);

struct NoisyData {
  std::vector<DataBlock> y_delta;
  std::vector<double> delta;
};

/// Gaussian noise scaled so that ‖y_i^δ - y_i‖ = rel_level · ‖y_i‖ per block.
NoisyData add_noise(const std::vector<DataBlock>& y, double rel_level, std::uint64_t seed);

}  // namespace lsdk::radon

#endif  // LSDK_RADON_HPP
