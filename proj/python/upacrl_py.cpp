#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "upacrl/audit.hpp"
#include "upacrl/bandit.hpp"
#include "upacrl/cli.hpp"
#include "upacrl/config.hpp"
#include "upacrl/errors.hpp"
#include "upacrl/harness.hpp"
#include "upacrl/io.hpp"
#include "upacrl/mdp.hpp"

namespace py = pybind11;
using namespace upacrl;

namespace {

py::object to_python(const io::Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::string value_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  if (py::isinstance<py::float_>(v)) return config::format_double(v.cast<double>());
  if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ",";
      out += value_text(item);
    }
    return out;
  }
  return py::str(v).cast<std::string>();
}

harness::RunConfig config_from_dict(const py::dict& d) {
  config::KeyValues kv;
  for (const auto& [k, v] : d) kv[py::str(k).cast<std::string>()] = value_text(v);
  return config::to_run_config(kv);
}

// Summary fields plus the per-round series.
py::dict run(const py::dict& settings, const std::optional<std::filesystem::path>& out) {
  const harness::RunConfig c = config_from_dict(settings);
  harness::RunMetrics m;
  {
    py::gil_scoped_release release;
    m = harness::run_experiment(c);
    if (out) io::write_results(m, *out);
  }
  py::dict result = to_python(io::summary_json(m));
  result["gaps"] = m.gaps;
  result["regret"] = m.regret;
  result["levels"] = m.levels;
  if (!m.returns.empty()) result["returns"] = m.returns;
  return result;
}

template <typename Check>
std::vector<py::tuple> check_tuples(const std::vector<Check>& checks) {
  std::vector<py::tuple> out;
  for (const auto& c : checks) out.push_back(py::make_tuple(c.name, c.passed, c.detail));
  return out;
}

std::vector<py::tuple> certify_file(const std::filesystem::path& path) {
  const io::Json j = io::load_json(path);
  if (j.value("type", "") == "bandit") {
    const auto file = io::bandit_file_from_json(j);
    const auto instance = io::make_bandit_instance(file, bandit::NoiseModel{}, 0);
    return check_tuples(bandit::certify(instance, file.decision_sets.size()));
  }
  return check_tuples(mdp::certify(io::mdp_data_from_json(j)));
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::run_cli(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Uniform-PAC linear bandit and linear MDP experiments";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CertificationError>(m, "CertificationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_RuntimeError);

  py::class_<RegularizedDesign>(m, "RegularizedDesign")
      .def(py::init<int, double, std::size_t>(), py::arg("dim"), py::arg("lam") = 1.0,
           py::arg("recondition_every") = RegularizedDesign::kDefaultReconditionEvery)
      .def("rank_one_update", &RegularizedDesign::rank_one_update, py::arg("x"))
      .def("accumulate_target", &RegularizedDesign::accumulate_target, py::arg("x"), py::arg("y"))
      .def("reset_targets", &RegularizedDesign::reset_targets)
      .def("ridge_solve", &RegularizedDesign::ridge_solve)
      .def("elliptical_norm", &RegularizedDesign::elliptical_norm, py::arg("x"))
      .def_property_readonly("cov", &RegularizedDesign::cov)
      .def_property_readonly("cov_inv", &RegularizedDesign::cov_inv)
      .def_property_readonly("target", &RegularizedDesign::target)
      .def_property_readonly("count", &RegularizedDesign::count);

  m.def("beta_bandit", &bandit::beta_bandit, py::arg("level"), py::arg("dim"), py::arg("delta"));
  m.def("level_capacity", &bandit::level_capacity, py::arg("dim"), py::arg("level"));
  m.def("beta_flute", &mdp::beta_flute, py::arg("level"), py::arg("dim"), py::arg("horizon"), py::arg("delta"),
        py::arg("c_beta") = 1.0);
  m.def("stage_level_capacity", &mdp::stage_level_capacity, py::arg("dim"), py::arg("level"), py::arg("stage"));
  m.def("weight_norm_cap", &mdp::weight_norm_cap, py::arg("dim"), py::arg("level"), py::arg("horizon"),
        py::arg("lam") = 1.0);

  m.def("run", &run, py::arg("settings"), py::arg("out") = py::none(),
        "Runs one experiment. `settings` uses the config-file keys, e.g. "
        "{'track': 'mdp', 'algorithm': 'flute', 'K': 500, 'mdp.horizon': 3}.");
  m.def("certify_file", &certify_file, py::arg("path"),
        "Structural checks of a JSON instance as (name, passed, detail) tuples.");
  m.def(
      "audit", [](const std::filesystem::path& dir) { return check_tuples(audit::audit_run(dir)); }, py::arg("dir"));
  m.def("cli", &run_cli, py::arg("args"), "Runs the command line tool in-process; returns (code, stdout, stderr).");
}
