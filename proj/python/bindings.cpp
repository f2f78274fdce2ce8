#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vaultopt/cli_io.hpp"
#include "vaultopt/oracles.hpp"

namespace py = pybind11;

namespace {

py::dict json_to_dict(const std::string& text) {
    py::object loads = py::module_::import("json").attr("loads");
    return loads(text);
}

} // namespace

PYBIND11_MODULE(_vaultopt, m) {
    m.doc() = "Optimal vaults and grid-shells over planar domains (C++ core)";

    m.def(
        "run_json",
        [](const std::string& config_json, const py::object& log) {
            vaultopt::RunConfig cfg = vaultopt::parse_config(config_json);
            vaultopt::LogSink sink;
            if (!log.is_none())
                sink = [log](const std::string& line) { log(line); };
            const vaultopt::RunReport rep = vaultopt::run(cfg, sink);
            return json_to_dict(vaultopt::report_to_json(rep, cfg));
        },
        py::arg("config_json"), py::arg("log") = py::none(),
        "Run the full pipeline for a JSON configuration string; returns the "
        "run report as a dict. `log` is an optional callable receiving "
        "progress lines.");

    m.def(
        "validate_config",
        [](const std::string& config_json) { (void)vaultopt::parse_config(config_json); },
        py::arg("config_json"), "Parse and validate a JSON configuration; raises on errors.");

    m.def(
        "analytic_disk_uniform",
        [](double p, double R) {
            const vaultopt::AnalyticSolution a = vaultopt::analytic_disk_uniform(p, R);
            py::dict d;
            d["Z"] = a.Z;
            d["apex"] = a.z(vaultopt::Vec2(0.0, 0.0));
            return d;
        },
        py::arg("p"), py::arg("R"),
        "Exact objective and apex elevation of the uniformly loaded disk.");

    m.def(
        "analytic_point_load",
        [](double P, double x0, double y0, double R) {
            const vaultopt::AnalyticSolution a =
                vaultopt::analytic_point_load(P, vaultopt::Vec2(x0, y0), R);
            py::dict d;
            d["Z"] = a.Z;
            d["apex"] = a.z(vaultopt::Vec2(x0, y0));
            return d;
        },
        py::arg("P"), py::arg("x0"), py::arg("y0"), py::arg("R"),
        "Exact objective and apex elevation for a point load on the disk.");
}
