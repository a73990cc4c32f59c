#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "solitondyn/errors.hpp"
#include "solitondyn/ground_state.hpp"
#include "solitondyn/harness.hpp"
#include "solitondyn/version.hpp"

namespace py = pybind11;
using namespace solitondyn;

namespace {

py::array_t<double> to_numpy(const SpectralGrid& g, const RealArray& a) {
  std::vector<py::ssize_t> shape(static_cast<std::size_t>(g.dim()), g.points());
  py::array_t<double> out(shape);
  std::copy(a.begin(), a.end(), out.mutable_data());
  return out;
}

py::array_t<double> axis(const SpectralGrid& g) {
  py::array_t<double> out(g.points());
  auto* d = out.mutable_data();
  for (int i = 0; i < g.points(); ++i) d[i] = g.coordinate(i);
  return out;
}

std::vector<double> vec_list(const Vec& v, int dim) { return {v.begin(), v.begin() + dim}; }

Vec list_vec(const std::vector<double>& v) {
  if (v.size() > static_cast<std::size_t>(kMaxDim)) throw Error(ErrorCategory::dimension, "at most 2 coordinates");
  Vec out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

py::dict record_columns(const std::vector<DiagnosticRecord>& records) {
  const std::size_t n = records.size();
  auto column = [n](auto&& get) {
    py::array_t<double> a(static_cast<py::ssize_t>(n));
    auto* d = a.mutable_data();
    for (std::size_t i = 0; i < n; ++i) d[i] = get(i);
    return a;
  };
  auto max_of = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
  py::dict out;
  out["time"] = column([&](std::size_t i) { return records[i].time; });
  out["energy"] = column([&](std::size_t i) { return records[i].energy_total; });
  out["hamiltonian"] = column([&](std::size_t i) { return records[i].hamiltonian; });
  out["omega"] = column([&](std::size_t i) { return records[i].omega; });
  out["omega_hat"] = column([&](std::size_t i) { return records[i].omega_hat; });
  out["gamma_dist"] = column([&](std::size_t i) { return records[i].gamma_dist; });
  out["error_h1"] = column([&](std::size_t i) { return max_of(records[i].error_h1); });
  out["error_modulus"] = column([&](std::size_t i) { return max_of(records[i].error_modulus); });
  out["mass"] = column([&](std::size_t i) {
    double s = 0.0;
    for (double m : records[i].masses) s += m;
    return s;
  });
  out["violations"] = column([&](std::size_t i) { return static_cast<double>(records[i].inequalities.violations); });
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semiclassical soliton dynamics core";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error_type(m, "SolitondynError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(py::str(e.what()));
      inst.attr("category") = py::str(std::string(category_name(e.category())));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  py::class_<SpectralGrid>(m, "SpectralGrid")
      .def(py::init<int, double, int>(), py::arg("dim"), py::arg("extent"), py::arg("points"))
      .def_property_readonly("dim", &SpectralGrid::dim)
      .def_property_readonly("extent", &SpectralGrid::extent)
      .def_property_readonly("points", &SpectralGrid::points)
      .def_property_readonly("spacing", &SpectralGrid::spacing)
      .def_property_readonly("size", &SpectralGrid::size)
      .def("axis", &axis, "Sample coordinates along one axis");

  py::class_<NonlinearityParams>(m, "NonlinearityParams")
      .def(py::init<>())
      .def_static("scalar", &NonlinearityParams::scalar, py::arg("p"), py::arg("alpha") = 1.0, py::arg("beta") = 0.0)
      .def_static("coupled", &NonlinearityParams::coupled, py::arg("p"), py::arg("alpha"), py::arg("gamma"))
      .def_readwrite("components", &NonlinearityParams::components)
      .def_readwrite("p", &NonlinearityParams::p)
      .def_readwrite("alpha", &NonlinearityParams::alpha)
      .def_readwrite("gamma", &NonlinearityParams::gamma)
      .def_readwrite("beta", &NonlinearityParams::beta)
      .def_readwrite("omega", &NonlinearityParams::omega);

  py::class_<GroundState>(m, "GroundState")
      .def_readonly("grid", &GroundState::grid)
      .def_readonly("masses", &GroundState::masses)
      .def_readonly("total_mass", &GroundState::total_mass)
      .def_readonly("energy", &GroundState::energy)
      .def_readonly("residual", &GroundState::residual)
      .def_readonly("multipliers", &GroundState::multipliers)
      .def_readonly("iterations", &GroundState::iterations)
      .def_property_readonly("components", &GroundState::components)
      .def("profile", [](const GroundState& r, int j) {
        if (j < 0 || j >= r.components()) throw py::index_error("component out of range");
        return to_numpy(r.grid, r.profile[static_cast<std::size_t>(j)]);
      }, py::arg("component") = 0)
      .def("decay_radius", &GroundState::decay_radius, py::arg("rel") = 1e-12);

  m.def("solve_canonical_ground_state", &solve_canonical_ground_state, py::arg("params"), py::arg("grid"),
        py::arg("tol") = 1e-10, py::call_guard<py::gil_scoped_release>());
  m.def("closed_form_profile", [](double p, const SpectralGrid& g) { return to_numpy(g, closed_form_profile(p, g)); },
        py::arg("p"), py::arg("grid"));
  m.def("closed_form_mass", &closed_form_mass, py::arg("p"));
  m.def("system_residual", py::overload_cast<const GroundState&, const NonlinearityParams&>(&system_residual),
        py::arg("ground_state"), py::arg("params"));

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_static("preset", &ScenarioConfig::preset, py::arg("name"))
      .def_static("preset_names", &ScenarioConfig::preset_names)
      .def_static("from_ini", [](const std::string& text) {
        std::istringstream in(text);
        return ScenarioConfig::from_ini(in);
      }, py::arg("text"))
      .def_static("from_file", &ScenarioConfig::from_file, py::arg("path"))
      .def("to_ini", &ScenarioConfig::to_ini)
      .def("validate", &ScenarioConfig::validate)
      .def_readwrite("name", &ScenarioConfig::name)
      .def_readwrite("dim", &ScenarioConfig::dim)
      .def_readwrite("spacing", &ScenarioConfig::spacing)
      .def_readwrite("ground_points", &ScenarioConfig::ground_points)
      .def_readwrite("margin", &ScenarioConfig::margin)
      .def_readwrite("max_points", &ScenarioConfig::max_points)
      .def_readwrite("params", &ScenarioConfig::params)
      .def_readwrite("epsilons", &ScenarioConfig::epsilons)
      .def_readwrite("T0", &ScenarioConfig::T0)
      .def_readwrite("dt", &ScenarioConfig::dt)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("records", &ScenarioConfig::records)
      .def_readwrite("floor_initial", &ScenarioConfig::floor_initial)
      .def_readwrite("floor_run", &ScenarioConfig::floor_run)
      .def_readwrite("floor_center", &ScenarioConfig::floor_center)
      .def_property("position", [](const ScenarioConfig& c) { return vec_list(c.position, c.dim); },
                    [](ScenarioConfig& c, const std::vector<double>& v) { c.position = list_vec(v); })
      .def_property("velocity", [](const ScenarioConfig& c) { return vec_list(c.velocity, c.dim); },
                    [](ScenarioConfig& c, const std::vector<double>& v) { c.velocity = list_vec(v); });

  py::class_<MemberSummary>(m, "MemberSummary")
      .def_readonly("error_h1_sup", &MemberSummary::error_h1_sup)
      .def_readonly("error_h1_sup_component", &MemberSummary::error_h1_sup_component)
      .def_readonly("error_modulus_sup", &MemberSummary::error_modulus_sup)
      .def_readonly("error_modulus_sup_component", &MemberSummary::error_modulus_sup_component)
      .def_readonly("center_gap_sup", &MemberSummary::center_gap_sup)
      .def_readonly("omega_hat_sup", &MemberSummary::omega_hat_sup)
      .def_readonly("omega_sup", &MemberSummary::omega_sup)
      .def_readonly("omega0", &MemberSummary::omega0)
      .def_readonly("omega_hat0", &MemberSummary::omega_hat0)
      .def_readonly("energy_expansion0", &MemberSummary::energy_expansion0)
      .def_readonly("mass_drift", &MemberSummary::mass_drift)
      .def_readonly("energy_drift", &MemberSummary::energy_drift)
      .def_readonly("violations", &MemberSummary::violations)
      .def_readonly("all_valid", &MemberSummary::all_valid)
      .def_readonly("tstar", &MemberSummary::tstar)
      .def_readonly("final_time", &MemberSummary::final_time)
      .def_readonly("samples", &MemberSummary::samples);

  py::class_<MemberResult>(m, "MemberResult")
      .def_readonly("epsilon", &MemberResult::epsilon)
      .def_readonly("ok", &MemberResult::ok)
      .def_readonly("error_category", &MemberResult::error_category)
      .def_readonly("error_message", &MemberResult::error_message)
      .def_readonly("points", &MemberResult::points)
      .def_readonly("extent", &MemberResult::extent)
      .def_readonly("dt", &MemberResult::dt)
      .def_readonly("steps", &MemberResult::steps)
      .def_readonly("t_final", &MemberResult::t_final)
      .def_readonly("ground_energy", &MemberResult::ground_energy)
      .def_readonly("summary", &MemberResult::summary)
      .def("columns", [](const MemberResult& r) { return record_columns(r.records); },
           "Per-sample diagnostics as numpy arrays");

  py::class_<SlopeReport>(m, "SlopeReport")
      .def_readonly("name", &SlopeReport::name)
      .def_readonly("epsilons", &SlopeReport::epsilons)
      .def_readonly("values", &SlopeReport::values)
      .def_readonly("used", &SlopeReport::used)
      .def_readonly("floor", &SlopeReport::floor)
      .def_readonly("slope", &SlopeReport::slope)
      .def_readonly("intercept", &SlopeReport::intercept)
      .def_readonly("residual", &SlopeReport::residual)
      .def_readonly("monotone", &SlopeReport::monotone)
      .def_readonly("status", &SlopeReport::status);

  py::class_<SweepResult>(m, "SweepResult")
      .def_readonly("config", &SweepResult::config)
      .def_readonly("members", &SweepResult::members)
      .def_readonly("partial", &SweepResult::partial)
      .def_readonly("slopes", &SweepResult::slopes)
      .def("slope", [](const SweepResult& r, const std::string& name) {
        for (const auto& s : r.slopes)
          if (s.name == name) return s;
        throw py::key_error(name);
      }, py::arg("name"))
      .def("format_slopes", &format_slopes)
      .def("format_summary", &format_summary)
      .def("write", &write_run, py::arg("directory"));

  m.def("fit_slopes", &fit_slopes, py::arg("name"), py::arg("epsilons"), py::arg("values"), py::arg("floor") = 0.0);
  m.def("run_scenario", [](const ScenarioConfig& c, std::optional<double> t_final, int workers) {
    SweepOptions o;
    o.member.overrides.t_final = t_final;
    o.workers = workers;
    return run_scenario(c, o);
  }, py::arg("config"), py::arg("t_final") = py::none(), py::arg("workers") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("load_run", &load_run, py::arg("directory"));
}
