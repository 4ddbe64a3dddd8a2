#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pathhjb/acceptance.hpp"
#include "pathhjb/cli.hpp"
#include "pathhjb/control.hpp"
#include "pathhjb/error.hpp"
#include "pathhjb/path.hpp"
#include "pathhjb/problems.hpp"

namespace py = pybind11;
using namespace pathhjb;

namespace {

// A path from its node list, one inner list per node.
DiscretePath to_path(double step, const std::vector<std::vector<double>>& nodes) {
    return DiscretePath::from_nodes(step, nodes);
}

py::dict estimate_dict(const ValueEstimate& v) {
    py::dict d;
    d["value"] = v.value;
    d["std_error"] = v.std_error;
    d["solver"] = to_string(v.solver);
    d["n_steps"] = v.n_steps;
    d["n_paths"] = v.n_paths;
    d["seed"] = v.seed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_pathhjb, m) {
    m.doc() = "Path-dependent stochastic control toolkit";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a command line; returns (exit_code, stdout, stderr).");

    m.def(
        "sup_norm", [](double step, const std::vector<std::vector<double>>& nodes) {
            return sup_norm(to_path(step, nodes));
        },
        py::arg("step"), py::arg("nodes"));
    m.def(
        "h_norm_sq", [](double step, const std::vector<std::vector<double>>& nodes) {
            return h_norm_sq(to_path(step, nodes));
        },
        py::arg("step"), py::arg("nodes"));
    m.def(
        "d_infty",
        [](double step, const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
            return d_infty(to_path(step, a), to_path(step, b));
        },
        py::arg("step"), py::arg("a"), py::arg("b"));

    m.def(
        "analytic_value",
        [](const std::string& problem, double step, const std::vector<std::vector<double>>& nodes) {
            return analytic_value(make_problem(problem), to_path(step, nodes));
        },
        py::arg("problem"), py::arg("step"), py::arg("nodes"));
    m.def(
        "value_tree",
        [](const std::string& problem, std::size_t n_steps) {
            const ProblemSpec spec = make_problem(problem);
            return estimate_dict(value_tree(spec.coeffs, origin_path(spec.coeffs.state_dim, spec.coeffs.horizon, n_steps),
                                            spec.controls));
        },
        py::arg("problem"), py::arg("n_steps"), "Exact tree value at the zero path, time 0.");
    m.def(
        "value_regression",
        [](const std::string& problem, std::size_t n_steps, std::size_t paths, std::uint64_t seed) {
            const ProblemSpec spec = make_problem(problem);
            RegressionConfig cfg;
            cfg.paths = paths;
            cfg.seed = seed;
            py::gil_scoped_release release;
            const ValueEstimate v = value_regression(
                spec.coeffs, origin_path(spec.coeffs.state_dim, spec.coeffs.horizon, n_steps), spec.controls, cfg);
            py::gil_scoped_acquire acquire;
            return estimate_dict(v);
        },
        py::arg("problem"), py::arg("n_steps"), py::arg("paths") = 10000, py::arg("seed") = 1);

    m.def(
        "run_criterion",
        [](int id) {
            CriterionResult r;
            {
                py::gil_scoped_release release;
                r = run_criterion(id);
            }
            py::dict d;
            d["id"] = r.id;
            d["name"] = r.name;
            d["pass"] = r.pass;
            d["detail"] = r.detail;
            return d;
        },
        py::arg("id"), "Run one acceptance criterion (1..15).");
    m.attr("criteria_count") = kCriteriaCount;
}
