#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mgt/config.hpp"
#include "mgt/dnmap.hpp"
#include "mgt/errors.hpp"
#include "mgt/experiment.hpp"
#include "mgt/forward.hpp"
#include "mgt/fracop.hpp"
#include "mgt/io.hpp"

namespace py = pybind11;
using namespace mgt;

namespace {

// Config dictionaries cross the boundary as JSON text.
nlohmann::json from_py(const py::object& obj) {
    const py::module_ json = py::module_::import("json");
    return nlohmann::json::parse(py::str(json.attr("dumps")(obj)).cast<std::string>());
}

py::object to_py(const nlohmann::json& j) {
    const py::module_ json = py::module_::import("json");
    return json.attr("loads")(j.dump());
}

py::dict trajectory_dict(const Trajectory& tr) {
    py::dict d;
    d["t"] = Eigen::VectorXd::LinSpaced(tr.time.steps + 1, 0.0, tr.time.T());
    d["u"] = tr.u;
    d["ut"] = tr.ut;
    d["utt"] = tr.utt;
    d["iterations"] = tr.iterations;
    d["contraction"] = tr.contraction;
    return d;
}

}  // namespace

PYBIND11_MODULE(_mgtlab, m) {
    m.doc() = "Fractional MGT solvers and experiment pipelines";
    m.attr("__version__") = MGT_VERSION;

    const auto base = py::register_exception<Error>(m, "MgtError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    py::class_<Grid>(m, "Grid")
        .def_readonly("dim", &Grid::d)
        .def_readonly("N", &Grid::N)
        .def_readonly("h", &Grid::h)
        .def_readonly("n_tot", &Grid::n_tot)
        .def_readonly("omega", &Grid::omega)
        .def_readonly("w1", &Grid::w1)
        .def_readonly("w2", &Grid::w2)
        .def("coords", [](const Grid& g) {
            Eigen::VectorXd x(g.n_tot);
            for (int i = 0; i < g.n_tot; ++i) x(i) = g.coord(i);
            return x;
        });
    m.def("default_grid_1d", [](int N) { return default_grid_1d(N); }, py::arg("N"));

    py::class_<FracOp>(m, "FracOp")
        .def_readonly("s", &FracOp::s)
        .def_readonly("eigenvalues", &FracOp::lambda)
        .def("apply", [](const FracOp& op, const Eigen::MatrixXd& u) { return Eigen::MatrixXd(frac_apply(op, u)); })
        .def("pairing", [](const FracOp& op, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
            return frac_pairing(op, f, g);
        });
    m.def("build_fracop", &build_fracop, py::arg("grid"), py::arg("s"));

    m.def(
        "operator_laws",
        [](const FracOp& op, int samples) {
            const OperatorLawsReport r = check_operator_laws({op}, samples);
            py::dict d;
            d["orthonormality"] = r.orthonormality;
            d["symmetry"] = r.symmetry;
            d["psd_min"] = r.psd_min;
            d["semigroup"] = r.semigroup;
            d["base_residual"] = r.base_residual;
            d["poincare_excess"] = r.poincare_excess;
            return d;
        },
        py::arg("op"), py::arg("samples") = 200);

    m.def(
        "solve_exterior",
        [](const FracOp& op, double T, double dt, double amplitude, int mode, double alpha, double b, double c) {
            MGTParams p{alpha, b, c, 1.0};
            const TimeGrid tg = TimeGrid::from_horizon(T, dt);
            const ExteriorInput phi = make_input(op.grid, op.grid.w1, sin_cubed(T, mode), amplitude);
            const Trajectory tr = solve_linear_mgt(op, p, Potential::zero(), Forcing::zero(), phi, tg);
            py::dict d = trajectory_dict(tr);
            d["x_norm"] = x_norm(op, tr);
            d["pairing"] = dn_pairing(tr, make_input(op.grid, op.grid.w2, sin_cubed(T, 0)).time_reversed(), op, p);
            return d;
        },
        py::arg("op"), py::arg("T") = 1.0, py::arg("dt") = 1e-3, py::arg("amplitude") = 1.0, py::arg("mode") = 0,
        py::arg("alpha") = 1.0, py::arg("b") = 1.0, py::arg("c") = 0.5,
        "Linear solve for a sin^3 datum on the left window; returns the trajectory on omega.");

    m.def("pipeline_names", &pipeline_names);
    m.def("default_config", [](const std::string& p) { return to_py(to_json(default_config(p))); }, py::arg("pipeline"));
    m.def("validate_config", [](const py::object& cfg) { return to_py(to_json(parse_config(from_py(cfg)))); },
          py::arg("config"));
    m.def(
        "run_experiment",
        [](const py::object& cfg) {
            const ExperimentConfig c = parse_config(from_py(cfg));
            RunManifest r;
            {
                py::gil_scoped_release release;
                r = run_experiment(c);
                emit_report({r}, r.output_dir);
            }
            return to_py(r.to_json());
        },
        py::arg("config"), "Runs a pipeline and writes its report; returns the manifest as a dict.");

    m.def("read_field", [](const std::filesystem::path& base) { return read_field(base); }, py::arg("base"));
    m.def("sha256_hex", [](const std::string& s) { return sha256_hex(s); }, py::arg("data"));
}
