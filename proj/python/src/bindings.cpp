#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lsdk/doping.hpp"
#include "lsdk/harness.hpp"
#include "lsdk/radon.hpp"

namespace py = pybind11;
using namespace lsdk;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ParameterVector to_field(const Array& a, double cell_weight) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return ParameterVector({rows, cols}, cell_weight, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_field(const ParameterVector& x) {
  const std::vector<py::ssize_t> shape = {static_cast<py::ssize_t>(x.shape().rows),
                                         static_cast<py::ssize_t>(x.shape().cols)};
  const std::vector<py::ssize_t> strides = {shape[1] * static_cast<py::ssize_t>(sizeof(double)),
                                           static_cast<py::ssize_t>(sizeof(double))};
  return Array(shape, strides, x.values().data());
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw DimensionError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array from_vector(std::span<const double> v) {
  // Explicit strides: the count-only constructor misbehaves on older pybind11.
  return Array({static_cast<py::ssize_t>(v.size())}, {static_cast<py::ssize_t>(sizeof(double))}, v.data());
}

doping::DeviceGrid device(std::size_t m, double mu_n) {
  doping::DeviceGrid g;
  g.m = m;
  g.mu_n = mu_n;
  g.validate();
  return g;
}

py::dict summary_dict(const harness::ExperimentSummary& s) {
  py::dict d;
  d["variant"] = harness::to_string(s.variant);
  d["cycles"] = s.cycles;
  d["total_updates"] = s.total_updates;
  d["forward_evals"] = s.forward_evals;
  d["adjoint_evals"] = s.adjoint_evals;
  d["final_error"] = s.final_error;
  d["min_error"] = s.min_error;
  d["min_error_cycle"] = s.min_error_cycle;
  d["max_residual"] = s.max_residual;
  d["max_residual_over_threshold"] = s.max_discrepancy_ratio;
  d["stop_reason"] = s.stop_reason;
  d["alpha_min"] = s.alpha_min;
  d["norm_bound"] = s.norm_bound;
  d["step_bound_violations"] = s.step_bound_violations;
  d["alpha_floor_violations"] = s.alpha_floor_violations;
  d["runtime_seconds"] = s.runtime_seconds;
  return d;
}

py::dict result_dict(const harness::ExperimentResult& r) {
  py::dict d;
  d["summary"] = summary_dict(r.summary);
  d["x_final"] = from_field(r.x_final);
  d["truth"] = r.truth ? py::object(from_field(*r.truth)) : py::none();
  d["per_cycle_updates"] = r.per_cycle_updates;
  d["final_residuals"] = r.final_residuals;
  d["noise_levels"] = r.noise_levels;
  d["cgne_errors"] = r.cgne_errors;
  py::list steps;
  for (const auto& s : r.trace.steps) {
    py::dict row;
    row["k"] = s.k;
    row["op_index"] = s.op_index;
    row["omega"] = s.omega;
    row["alpha"] = s.alpha;
    row["residual_norm"] = s.residual_norm;
    row["step_norm"] = s.step_norm;
    row["error_rel"] = s.error_rel;
    steps.append(row);
  }
  d["steps"] = steps;
  return d;
}

}  // namespace

PYBIND11_MODULE(_lsdk, m) {
  m.doc() = "Loping steepest-descent Kaczmarz solvers: radon and doping test problems";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DegenerateStepError>(m, "DegenerateStepError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<SolverFailure>(m, "SolverFailure", base.ptr());

  // Radon ----------------------------------------------------------------------
  py::class_<radon::DetectorSet>(m, "DetectorSet")
      .def_property_readonly("centers",
                             [](const radon::DetectorSet& d) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto& p : d.centers) out.emplace_back(p.x, p.y);
                               return out;
                             })
      .def_property_readonly("radial_grid", [](const radon::DetectorSet& d) { return from_vector(d.radial_grid); })
      .def_readonly("angular_count", &radon::DetectorSet::angular_count)
      .def("data_weights", [](const radon::DetectorSet& d) { return from_vector(d.data_weights()); })
      .def("__len__", &radon::DetectorSet::size);

  m.def("make_detectors", &radon::make_detectors, py::arg("n"), py::arg("n_t"), py::arg("n_sigma"));

  m.def(
      "radon_forward",
      [](const Array& x, const radon::DetectorSet& det, std::size_t i) {
        const radon::ImageGrid g{static_cast<std::size_t>(x.shape(0)), static_cast<std::size_t>(x.ndim() > 1 ? x.shape(1) : 0)};
        return from_vector(radon::radon_forward(to_field(x, g.cell_area()), det, i).values());
      },
      py::arg("x"), py::arg("detectors"), py::arg("i"));

  m.def(
      "radon_adjoint",
      [](const Array& y, const radon::DetectorSet& det, std::size_t i, std::size_t rows, std::size_t cols) {
        const DataBlock block(to_vector(y), det.data_weights());
        return from_field(radon::radon_adjoint(block, det, i, radon::ImageGrid{rows, cols}));
      },
      py::arg("y"), py::arg("detectors"), py::arg("i"), py::arg("rows"), py::arg("cols"));

  m.def(
      "make_phantom",
      [](const std::optional<std::string>& scene, std::size_t rows, std::size_t cols) {
        const auto shapes = scene ? radon::parse_scene(*scene) : radon::default_scene();
        return from_field(radon::make_phantom({shapes, radon::ImageGrid{rows, cols}}));
      },
      py::arg("scene") = py::none(), py::arg("rows") = 120, py::arg("cols") = 120,
      "Phantom from scene text (default scene when omitted).");

  // Doping ---------------------------------------------------------------------
  m.def(
      "voltage_profiles",
      [](std::size_t m_nodes, std::size_t n, double h) {
        std::vector<Array> out;
        for (const auto& p : doping::make_voltage_profiles(device(m_nodes, 1.0), n, h)) out.push_back(from_vector(p.values));
        return out;
      },
      py::arg("m"), py::arg("n"), py::arg("h"));

  m.def(
      "default_true_profile", [](std::size_t m_nodes) { return from_field(doping::default_true_profile(device(m_nodes, 1.0))); },
      py::arg("m"));

  m.def(
      "solve_pde",
      [](const Array& x, const Array& u, double mu_n) {
        const auto g = device(static_cast<std::size_t>(x.shape(0)), mu_n);
        const auto pot = doping::solve_pde(to_field(x, g.cell_weight()), {to_vector(u)}, g);
        return from_field(ParameterVector(g.shape(), g.cell_weight(), pot));
      },
      py::arg("x"), py::arg("u"), py::arg("mu_n") = 1.0);

  m.def(
      "doping_forward",
      [](const Array& x, const Array& u, double mu_n) {
        const auto g = device(static_cast<std::size_t>(x.shape(0)), mu_n);
        return doping::doping_forward(to_field(x, g.cell_weight()), {to_vector(u)}, g);
      },
      py::arg("x"), py::arg("u"), py::arg("mu_n") = 1.0);

  m.def(
      "doping_derivative",
      [](const Array& x, const Array& dx, const Array& u, double mu_n) {
        const auto g = device(static_cast<std::size_t>(x.shape(0)), mu_n);
        return doping::doping_derivative(to_field(x, g.cell_weight()), to_field(dx, g.cell_weight()), {to_vector(u)}, g);
      },
      py::arg("x"), py::arg("dx"), py::arg("u"), py::arg("mu_n") = 1.0);

  m.def(
      "doping_adjoint",
      [](const Array& x, double r, const Array& u, double mu_n) {
        const auto g = device(static_cast<std::size_t>(x.shape(0)), mu_n);
        return from_field(doping::doping_adjoint(to_field(x, g.cell_weight()), r, {to_vector(u)}, g));
      },
      py::arg("x"), py::arg("r"), py::arg("u"), py::arg("mu_n") = 1.0);

  // Experiments ----------------------------------------------------------------
  py::class_<harness::ExperimentConfig>(m, "ExperimentConfig")
      .def_property_readonly("problem", [](const harness::ExperimentConfig& c) { return harness::to_string(c.problem); })
      .def_property_readonly("variant", [](const harness::ExperimentConfig& c) { return harness::to_string(c.variant); })
      .def_readonly("tau", &harness::ExperimentConfig::tau)
      .def_readonly("noise_rel", &harness::ExperimentConfig::noise_rel)
      .def_readonly("seed", &harness::ExperimentConfig::seed)
      .def_readonly("grid", &harness::ExperimentConfig::grid)
      .def_readonly("n_detectors", &harness::ExperimentConfig::n_detectors)
      .def_readonly("m", &harness::ExperimentConfig::m);

  m.def("parse_config", &harness::parse_config, py::arg("text"));
  m.def("load_config", &harness::load_config, py::arg("path"));
  m.def(
      "execute",
      [](const harness::ExperimentConfig& c) {
        harness::ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = harness::execute(c);
        }
        return result_dict(r);
      },
      py::arg("config"), "Run an experiment in memory and return its summary, iterate and trace.");
  m.def(
      "run_experiment",
      [](const harness::ExperimentConfig& c, const std::filesystem::path& dir) {
        harness::ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = harness::run_experiment(c, dir);
        }
        return summary_dict(r.summary);
      },
      py::arg("config"), py::arg("output_dir"), "Run an experiment and write its artifacts.");
}
