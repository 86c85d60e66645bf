#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "annealab/analysis.hpp"
#include "annealab/depth.hpp"
#include "annealab/dynamics.hpp"
#include "annealab/error.hpp"
#include "annealab/harness.hpp"
#include "annealab/landscape.hpp"
#include "annealab/schedule.hpp"

namespace py = pybind11;
using namespace annealab;

namespace {

GridField catalog_grid(const std::string& id, const ParamMap& params, std::uint64_t cells) {
  return discretize(normalize(make_catalog_landscape(id, params), cells), cells);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulated annealing experiments on catalog energy landscapes";

  py::register_exception<Error>(m, "AnnealabError", PyExc_ValueError);

  py::class_<Landscape>(m, "Landscape")
      .def_property_readonly("name", &Landscape::name)
      .def_property_readonly("dim", &Landscape::dim)
      .def_property_readonly("lower", [](const Landscape& l) { return l.domain().lo; })
      .def_property_readonly("upper", [](const Landscape& l) { return l.domain().hi; })
      .def("value", [](const Landscape& l, const Point& x) { return l.eval(x); }, py::arg("x"))
      .def("gradient", [](const Landscape& l, const Point& x) { return l.grad(x); }, py::arg("x"));

  m.def("catalog_ids", &catalog_ids);
  m.def("landscape", &make_catalog_landscape, py::arg("id"), py::arg("params") = ParamMap{});

  m.def(
      "depth_json",
      [](const std::string& id, const ParamMap& params, std::uint64_t cells) {
        return depth_report_json(critical_depth(catalog_grid(id, params, cells)));
      },
      py::arg("id"), py::arg("params") = ParamMap{}, py::arg("cells") = 16385);

  m.def(
      "validate_schedule_json",
      [](double theta, double eta0, double depth_ratio, std::uint64_t horizon) {
        return schedule_report_json(validate_allowing_zero_depth(StepSchedule(eta0, theta), depth_ratio, horizon));
      },
      py::arg("theta"), py::arg("eta0"), py::arg("depth_ratio"), py::arg("horizon") = 1'000'000);

  m.def("rate_exponent", &rate_exponent, py::arg("energy"), py::arg("critical_depth"), py::arg("delta"));

  m.def(
      "gibbs_tail",
      [](const std::string& id, const ParamMap& params, double tau, double delta, std::uint64_t cells) {
        return gibbs_tail_quadrature(catalog_grid(id, params, cells), tau, delta);
      },
      py::arg("id"), py::arg("params"), py::arg("tau"), py::arg("delta"), py::arg("cells") = 65536);

  m.def(
      "spectral_gap",
      [](const std::string& id, const ParamMap& params, double tau, std::uint64_t cells) {
        return spectral_gap_1d(make_catalog_landscape(id, params), tau, cells);
      },
      py::arg("id"), py::arg("params"), py::arg("tau"), py::arg("cells") = 2048);

  m.def(
      "spectral_json",
      [](const std::string& id, const ParamMap& params, const std::vector<double>& taus, std::uint64_t cells) {
        return spectral_report_json(eyring_kramers_fit(make_catalog_landscape(id, params), taus, cells));
      },
      py::arg("id"), py::arg("params"), py::arg("taus"), py::arg("cells") = 2049);

  m.def(
      "fit_json",
      [](const std::string& tail_csv, double burn_in_theta, std::uint64_t min_exceed) {
        return fit_result_json(fit_decay(parse_tail_csv(tail_csv, 0.0), FitOptions{burn_in_theta, min_exceed}));
      },
      py::arg("tail_csv"), py::arg("burn_in_theta"), py::arg("min_exceed") = 5);

  m.def(
      "simulate_chain",
      [](const Landscape& land, const Point& x0, double eta0, double theta, double energy,
         std::uint64_t steps, std::uint64_t seed, std::uint64_t chain_id) {
        const StepSchedule ss(eta0, theta);
        const CoolingSchedule cs(energy);
        ChainState s = init_chain(PointMass{x0}, seed, chain_id);
        py::gil_scoped_release release;
        for (std::uint64_t k = 0; k < steps; ++k) sa_step_inplace(s, land, ss, cs);
        return s.x;
      },
      py::arg("landscape"), py::arg("x0"), py::arg("eta0"), py::arg("theta"), py::arg("energy"),
      py::arg("steps"), py::arg("seed"), py::arg("chain_id") = 0);

  m.def(
      "run_anneal_json",
      [](const std::string& config_json, unsigned workers, bool force, bool restart) {
        const ExperimentConfig config = parse_config(config_json);
        RunOptions options;
        options.workers = workers;
        options.force = force;
        options.restart = restart;
        {
          py::gil_scoped_release release;
          run_anneal(config, options);
        }
        return read_text_file(std::filesystem::path(config.output_dir) / "result.json");
      },
      py::arg("config_json"), py::arg("workers") = 1, py::arg("force") = false, py::arg("restart") = false);
}
