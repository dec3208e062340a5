#pragma once

#include "pasa/netlist.hpp"
#include "pasa/parareal.hpp"
#include "pasa/sensitivity.hpp"
#include "pasa/transient.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pasa {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Method { Dsa, AsaTransient, AsaPeriodicLiterature, AsaPeriodic, Fd };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct ExperimentConfig {
    std::string netlist = "buck"; // builtin name ("buck", "rc") or file path
    int qoi_node = -1;            // -1 = builtin default; required for netlist files
    std::vector<Method> methods = {Method::Dsa, Method::AsaPeriodic};
    Real horizon_periods = 25.0;  // transient horizon as a multiple of T_p
    int steps_per_period = 4000;
    int coarse_steps_per_period = 50;
    Scheme scheme = Scheme::BackwardEuler;
    int n_subintervals = 2;
    Real threshold = 1e-4;
    int max_iterations = 60;
    Real h_rel = 1e-6;
    std::string out_dir = "pasa_out";

    void validate() const; // throws ConfigError
};

/// Key=value configuration file; '#' and '*' start comments.
ExperimentConfig load_config(const std::string& path);

struct OverheadStats {
    Real overhead_percent = 0.0;        // (1 − T_p/horizon)·100
    Real steady_fraction_percent = 0.0; // (T_p/horizon)·100
};

/// Also prints the one-line summary to `out` when given.
OverheadStats emit_overhead_stats(Real horizon, Real period, std::ostream* out = nullptr);

struct ExperimentResult {
    SensitivityReport report;
    std::vector<std::string> failures; // per-method diagnostics
    int exit_code = 0;                 // 0 ok, 2 any method failed
    Real period = 0.0;
    Real horizon = 0.0;
};

/// Run the selected sensitivity methods on the configured circuit and write
/// report.csv, vout.csv, sens_<param>.csv, pppc_history.csv and timing.csv
/// into cfg.out_dir. Partial results are written even when a method fails.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// The builtin circuits: reference buck converter ("buck") and the
/// sine-driven RC demo ("rc"). Returns the default QoI node too.
Circuit builtin_circuit(const std::string& name, int* default_qoi_node = nullptr);

} // namespace pasa
