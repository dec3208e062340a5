#include "pasa/experiment.hpp"
#include "pasa/netlist.hpp"
#include "pasa/parareal.hpp"
#include "pasa/sensitivity.hpp"
#include "pasa/transient.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pasa;

namespace {

Scheme scheme_from_string(const std::string& name) {
    if (name == "be" || name == "backward_euler") return Scheme::BackwardEuler;
    if (name == "trap" || name == "trapezoidal") return Scheme::Trapezoidal;
    throw std::invalid_argument("unknown scheme '" + name + "' (use 'be' or 'trap')");
}

PropagatorSpec make_spec(const std::string& scheme, int steps, Real tol, int max_iter) {
    PropagatorSpec spec;
    spec.scheme = scheme_from_string(scheme);
    spec.steps_per_interval = steps;
    spec.newton.tol = tol;
    spec.newton.max_iter = max_iter;
    return spec;
}

Mat states_matrix(const Trajectory& traj) {
    const auto rows = static_cast<Eigen::Index>(traj.states.size());
    const auto cols = traj.states.empty() ? 0 : traj.states.front().size();
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) m.row(i) = traj.states[static_cast<std::size_t>(i)];
    return m;
}

std::vector<ParamDescriptor> pick_params(const Circuit& circuit,
                                         const std::vector<std::string>& names) {
    if (names.empty()) return circuit.params();
    std::vector<ParamDescriptor> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(circuit.param(n));
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Periodic adjoint sensitivity analysis for switched circuits";

    py::register_exception<NetlistError>(m, "NetlistError");
    py::register_exception<PeriodicityError>(m, "PeriodicityError");

    py::class_<ParamDescriptor>(m, "ParamDescriptor")
        .def_readonly("name", &ParamDescriptor::name)
        .def_readonly("nominal", &ParamDescriptor::nominal)
        .def("__repr__", [](const ParamDescriptor& p) {
            return "ParamDescriptor(" + p.name + "=" + std::to_string(p.nominal) + ")";
        });

    py::class_<Circuit>(m, "Circuit")
        .def(py::init<>())
        .def("add_resistor", &Circuit::add_resistor)
        .def("add_capacitor", &Circuit::add_capacitor)
        .def("add_inductor", &Circuit::add_inductor)
        .def("add_voltage_source_dc", &Circuit::add_voltage_source_dc)
        .def("add_voltage_source_sine", &Circuit::add_voltage_source_sine)
        .def("add_current_source_dc", &Circuit::add_current_source_dc)
        .def("add_pwm_switch", &Circuit::add_pwm_switch, py::arg("label"), py::arg("np"),
             py::arg("nn"), py::arg("hertz"), py::arg("duty"), py::arg("r_on") = 1e-3,
             py::arg("r_off") = 1e6)
        .def("add_diode", &Circuit::add_diode, py::arg("label"), py::arg("np"), py::arg("nn"),
             py::arg("saturation_current") = 1e-12, py::arg("thermal_voltage") = 25.85e-3)
        .def("validate", &Circuit::validate)
        .def("with_param_value", &Circuit::with_param_value)
        .def_property_readonly("node_count", &Circuit::node_count)
        .def_property_readonly("params", [](const Circuit& c) { return c.params(); })
        .def_property_readonly("device_count", [](const Circuit& c) { return c.devices().size(); })
        .def_property_readonly("fundamental_period", [](const Circuit& c) { return c.fundamental_period(); });

    m.def("parse_netlist", &parse_netlist);
    m.def("serialize_netlist", &serialize_netlist);
    m.def("build_buck_converter", &build_buck_converter, py::arg("vin") = 100.0,
          py::arg("fs") = 500.0, py::arg("inductance") = 1e-3, py::arg("r_parasitic") = 10e-3,
          py::arg("capacitance") = 100e-6, py::arg("r_load") = 0.8, py::arg("duty") = 0.5,
          py::arg("r_on") = 1e-3, py::arg("r_off") = 1e6, py::arg("diode_is") = 1e-12,
          py::arg("diode_vt") = 25.85e-3);
    m.def("list_parameters", &list_parameters);

    py::class_<QoiSpec>(m, "QoiSpec").def_readonly("selector", &QoiSpec::selector);

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("t", [](const Trajectory& tr) { return tr.grid; })
        .def_property_readonly("states", &states_matrix)
        .def("sample", &Trajectory::sample)
        .def("__len__", [](const Trajectory& tr) { return tr.size(); });

    py::class_<MnaSystem>(m, "MnaSystem")
        .def_property_readonly("dim", &MnaSystem::dim)
        .def("residual", &MnaSystem::residual)
        .def("capacitance", &MnaSystem::capacitance)
        .def("conductance", &MnaSystem::conductance)
        .def("conduction_jacobian", &MnaSystem::conduction_jacobian)
        .def("source", &MnaSystem::source)
        .def("param_stamp_action",
             [](const MnaSystem& sys, const std::string& name, const Vec& x, const Vec& xdot,
                Real t) { return sys.param_stamp_action(sys.circuit().param(name), x, xdot, t); })
        .def("node_voltage_qoi", &MnaSystem::node_voltage_qoi)
        .def("branch_index", &MnaSystem::branch_index)
        .def_property_readonly("period", &MnaSystem::period);

    m.def("assemble", &assemble);

    m.def(
        "integrate",
        [](const MnaSystem& sys, const Vec& x0, Real t0, Real t1, int steps,
           const std::string& scheme, Real tol, int max_iter) {
            return integrate(sys, x0, t0, t1, make_spec(scheme, steps, tol, max_iter));
        },
        py::arg("sys"), py::arg("x0"), py::arg("t0"), py::arg("t1"), py::arg("steps"),
        py::arg("scheme") = "be", py::arg("newton_tol") = 1e-10, py::arg("newton_max_iter") = 50);

    m.def(
        "integrate_adjoint",
        [](const MnaSystem& sys, const Trajectory& forward, const QoiSpec& qoi,
           const Vec& lambda_terminal, Real t0, Real t1, int steps, const std::string& scheme) {
            return integrate_adjoint(sys, forward, qoi, lambda_terminal, t0, t1,
                                     make_spec(scheme, steps, 1e-10, 50));
        },
        py::arg("sys"), py::arg("forward"), py::arg("qoi"), py::arg("lambda_terminal"),
        py::arg("t0"), py::arg("t1"), py::arg("steps"), py::arg("scheme") = "be");

    py::class_<PararealConfig>(m, "PararealConfig")
        .def(py::init([](int n, Real threshold, int max_iterations, int fine_steps,
                         int coarse_steps, const std::string& scheme) {
                 PararealConfig cfg;
                 cfg.n_subintervals = n;
                 cfg.threshold = threshold;
                 cfg.max_iterations = max_iterations;
                 cfg.fine = make_spec(scheme, fine_steps, 1e-10, 50);
                 cfg.coarse = make_spec(scheme, coarse_steps, 1e-10, 50);
                 return cfg;
             }),
             py::arg("n_subintervals") = 2, py::arg("threshold") = 1e-4,
             py::arg("max_iterations") = 50, py::arg("fine_steps") = 1000,
             py::arg("coarse_steps") = 10, py::arg("scheme") = "be")
        .def_readwrite("n_subintervals", &PararealConfig::n_subintervals)
        .def_readwrite("threshold", &PararealConfig::threshold)
        .def_readwrite("max_iterations", &PararealConfig::max_iterations)
        .def_readwrite("parallel_fine", &PararealConfig::parallel_fine);

    py::class_<PararealResult>(m, "PararealResult")
        .def_readonly("boundaries", &PararealResult::boundaries)
        .def_readonly("boundary_states", &PararealResult::boundary_states)
        .def_readonly("iterations", &PararealResult::iterations)
        .def_readonly("history", &PararealResult::history)
        .def_readonly("converged", &PararealResult::converged)
        .def_property_readonly("trajectory",
                               [](const PararealResult& r) { return stitch_fine_trajectories(r); });

    m.def("convergence_metric", &convergence_metric);
    m.def("parareal_solve",
          [](const MnaSystem& sys, const Vec& x0, Real t0, Real t1, const PararealConfig& cfg) {
              return parareal_solve(sys, x0, t0, t1, cfg);
          });
    m.def("pppc_solve", [](const MnaSystem& sys, Real t0, Real t1, const PararealConfig& cfg) {
        return pppc_solve(sys, t0, t1, cfg);
    });

    py::class_<PeriodicSolution>(m, "PeriodicSolution")
        .def_readonly("forward", &PeriodicSolution::forward)
        .def_readonly("adjoint", &PeriodicSolution::adjoint)
        .def_readonly("t_m", &PeriodicSolution::t_m)
        .def_readonly("period", &PeriodicSolution::period)
        .def_readonly("forward_defect", &PeriodicSolution::forward_defect)
        .def_readonly("adjoint_defect", &PeriodicSolution::adjoint_defect);

    py::class_<PeriodicRunInfo>(m, "PeriodicRunInfo")
        .def_readonly("forward_history", &PeriodicRunInfo::forward_history)
        .def_readonly("adjoint_history", &PeriodicRunInfo::adjoint_history)
        .def_readonly("forward_iterations", &PeriodicRunInfo::forward_iterations)
        .def_readonly("adjoint_iterations", &PeriodicRunInfo::adjoint_iterations)
        .def_readonly("converged", &PeriodicRunInfo::converged);

    m.def(
        "dsa",
        [](const MnaSystem& sys, const Trajectory& forward, const std::vector<std::string>& params) {
            return dsa(sys, forward, pick_params(sys.circuit(), params));
        },
        py::arg("sys"), py::arg("forward"), py::arg("params") = std::vector<std::string>{});

    m.def("integrate_qoi", &integrate_qoi);

    m.def(
        "asa_transient",
        [](const MnaSystem& sys, const Trajectory& forward, const QoiSpec& qoi,
           const std::vector<std::string>& params, Real t0, Real t_end) {
            return asa_transient(sys, forward, qoi, pick_params(sys.circuit(), params), t0, t_end);
        },
        py::arg("sys"), py::arg("forward"), py::arg("qoi"),
        py::arg("params") = std::vector<std::string>{}, py::arg("t0"), py::arg("t_end"));

    m.def(
        "asa_periodic_literature",
        [](const MnaSystem& sys, const Trajectory& forward, const QoiSpec& qoi,
           const std::vector<std::string>& params, Real period) {
            return asa_periodic_literature(sys, forward, qoi, pick_params(sys.circuit(), params),
                                           period);
        },
        py::arg("sys"), py::arg("forward"), py::arg("qoi"),
        py::arg("params") = std::vector<std::string>{}, py::arg("period"));

    m.def(
        "solve_periodic",
        [](const MnaSystem& sys, const QoiSpec& qoi, Real t_m, Real period,
           const PararealConfig& cfg) {
            PeriodicRunInfo info;
            PeriodicSolution sol = solve_periodic(sys, qoi, t_m, period, cfg, &info);
            return py::make_tuple(sol, info);
        },
        py::arg("sys"), py::arg("qoi"), py::arg("t_m"), py::arg("period"), py::arg("config"));

    m.def(
        "asa_periodic",
        [](const PeriodicSolution& sol, const MnaSystem& sys,
           const std::vector<std::string>& params) {
            return asa_periodic(sol, sys, pick_params(sys.circuit(), params));
        },
        py::arg("solution"), py::arg("sys"), py::arg("params") = std::vector<std::string>{});

    m.def("boundary_term_residual",
          [](const PeriodicSolution& sol, const MnaSystem& sys, const std::string& param,
             const Vec& dxdp_at_tm, const Vec& dxdp_at_tm_minus) {
              return boundary_term_residual(sol, sys, sys.circuit().param(param), dxdp_at_tm,
                                            dxdp_at_tm_minus);
          });

    m.def(
        "fd_oracle",
        [](const Circuit& circuit, const std::string& param, Real h_rel, const QoiSpec& qoi,
           Real window_a, Real window_b, Real t0, Real t1, int steps, const std::string& scheme) {
            FdRunSpec run;
            run.mode = FdMode::Transient;
            run.t0 = t0;
            run.t1 = t1;
            run.propagator = make_spec(scheme, steps, 1e-10, 50);
            return fd_oracle(circuit, circuit.param(param), h_rel, qoi, window_a, window_b, run);
        },
        py::arg("circuit"), py::arg("param"), py::arg("h_rel"), py::arg("qoi"),
        py::arg("window_a"), py::arg("window_b"), py::arg("t0"), py::arg("t1"), py::arg("steps"),
        py::arg("scheme") = "be");

    m.def("overhead_stats", [](Real horizon, Real period) {
        const OverheadStats s = emit_overhead_stats(horizon, period, nullptr);
        return py::make_tuple(s.overhead_percent, s.steady_fraction_percent);
    });
}
