#include "pasa/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace pasa {

namespace {

namespace fs = std::filesystem;

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    [[nodiscard]] Real seconds() const {
        return std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

Real to_real(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const Real x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') throw ConfigError("config: bad number for '" + key + "'");
    return x;
}

int to_int(const std::string& v, const std::string& key) {
    const Real x = to_real(v, key);
    if (x != std::floor(x)) throw ConfigError("config: '" + key + "' must be an integer");
    return static_cast<int>(x);
}

void write_text_file(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    writer(out);
}

std::string fmt(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string method_name(Method m) {
    switch (m) {
    case Method::Dsa: return "dsa";
    case Method::AsaTransient: return "asa_transient";
    case Method::AsaPeriodicLiterature: return "asa_periodic_literature";
    case Method::AsaPeriodic: return "asa_periodic";
    case Method::Fd: return "fd";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    const std::string n = lower(trim(name));
    if (n == "dsa") return Method::Dsa;
    if (n == "asa_transient") return Method::AsaTransient;
    if (n == "asa_periodic_literature") return Method::AsaPeriodicLiterature;
    if (n == "asa_periodic") return Method::AsaPeriodic;
    if (n == "fd") return Method::Fd;
    throw ConfigError("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (methods.empty()) throw ConfigError("config: no methods selected");
    if (!(horizon_periods > 0.0)) throw ConfigError("config: periods must be positive");
    if (steps_per_period < 2) throw ConfigError("config: steps_per_period must be at least 2");
    if (coarse_steps_per_period < 1) throw ConfigError("config: coarse_steps_per_period must be at least 1");
    if (steps_per_period < coarse_steps_per_period)
        throw ConfigError("config: steps_per_period must be >= coarse_steps_per_period");
    if (n_subintervals < 2) throw ConfigError("config: n_subintervals must be at least 2");
    if (!(threshold > 0.0)) throw ConfigError("config: threshold must be positive");
    if (max_iterations < 1) throw ConfigError("config: max_iterations must be at least 1");
    if (!(h_rel >= 1e-8 && h_rel <= 1e-2)) throw ConfigError("config: h_rel must lie in [1e-8, 1e-2]");
    const bool literature = std::find(methods.begin(), methods.end(),
                                      Method::AsaPeriodicLiterature) != methods.end();
    if (literature && horizon_periods < 2.0)
        throw ConfigError("config: asa_periodic_literature needs a horizon of at least 2 periods");
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    ExperimentConfig cfg;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto pos = line.find('#'); pos != std::string::npos) line = line.substr(0, pos);
        line = trim(line);
        if (line.empty() || line[0] == '*') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "netlist") cfg.netlist = value;
        else if (key == "qoi_node") cfg.qoi_node = to_int(value, key);
        else if (key == "methods") {
            cfg.methods.clear();
            std::istringstream ms(value);
            std::string item;
            while (std::getline(ms, item, ',')) {
                if (!trim(item).empty()) cfg.methods.push_back(parse_method(item));
            }
        } else if (key == "periods") cfg.horizon_periods = to_real(value, key);
        else if (key == "steps_per_period") cfg.steps_per_period = to_int(value, key);
        else if (key == "coarse_steps_per_period") cfg.coarse_steps_per_period = to_int(value, key);
        else if (key == "scheme") {
            const std::string s = lower(value);
            if (s == "be" || s == "backward_euler") cfg.scheme = Scheme::BackwardEuler;
            else if (s == "trap" || s == "trapezoidal") cfg.scheme = Scheme::Trapezoidal;
            else throw ConfigError("config: unknown scheme '" + value + "'");
        } else if (key == "n_subintervals") cfg.n_subintervals = to_int(value, key);
        else if (key == "threshold") cfg.threshold = to_real(value, key);
        else if (key == "max_iterations") cfg.max_iterations = to_int(value, key);
        else if (key == "h_rel") cfg.h_rel = to_real(value, key);
        else if (key == "out") cfg.out_dir = value;
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return cfg;
}

OverheadStats emit_overhead_stats(Real horizon, Real period, std::ostream* out) {
    if (!(horizon >= period) || !(period > 0.0))
        throw std::invalid_argument("emit_overhead_stats: need horizon >= period > 0");
    OverheadStats stats;
    stats.steady_fraction_percent = period / horizon * 100.0;
    stats.overhead_percent = 100.0 - stats.steady_fraction_percent;
    if (out != nullptr) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "steady-state window is %.4g %% of the simulated span; "
                      "transient-only overhead of the full simulation: %.4g %%",
                      stats.steady_fraction_percent, stats.overhead_percent);
        *out << line << '\n';
    }
    return stats;
}

Circuit builtin_circuit(const std::string& name, int* default_qoi_node) {
    const std::string n = lower(trim(name));
    if (n == "buck") {
        if (default_qoi_node != nullptr) *default_qoi_node = kBuckOutputNode;
        return build_buck_converter(100.0, 500.0, 1e-3, 10e-3, 100e-6, 0.8, 0.5);
    }
    if (n == "rc") {
        // divider with a DC-offset sine: the DC path gives the resistor
        // parameters a nonzero period-integral sensitivity
        if (default_qoi_node != nullptr) *default_qoi_node = 2;
        Circuit c;
        c.add_voltage_source_sine("V1", 1, 0, 2.0, 5.0, 1000.0);
        c.add_resistor("R1", 1, 2, 1000.0);
        c.add_capacitor("C1", 2, 0, 1e-8);
        c.add_resistor("R2", 2, 0, 2000.0);
        c.validate();
        return c;
    }
    throw ConfigError("unknown builtin circuit '" + name + "'");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    Circuit circuit;
    int qoi_node = cfg.qoi_node;
    if (cfg.netlist == "buck" || cfg.netlist == "rc") {
        int builtin_qoi = -1;
        circuit = builtin_circuit(cfg.netlist, &builtin_qoi);
        if (qoi_node < 0) qoi_node = builtin_qoi;
    } else {
        std::ifstream in(cfg.netlist);
        if (!in) throw ConfigError("cannot open netlist '" + cfg.netlist + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        circuit = parse_netlist(buffer.str());
        if (qoi_node < 0) throw ConfigError("config: qoi_node is required for netlist files");
    }
    if (!circuit.has_independent_source())
        throw ConfigError("circuit has no independent source; nothing to simulate");

    const MnaSystem sys = assemble(circuit);
    const auto period_opt = sys.period();
    if (!period_opt) throw ConfigError("circuit has no periodic source; periodic windows are undefined");
    const Real period = *period_opt;
    const Real horizon = cfg.horizon_periods * period;
    const QoiSpec qoi = sys.node_voltage_qoi(qoi_node);
    const auto params = list_parameters(circuit);

    fs::create_directories(cfg.out_dir);
    const fs::path out_dir(cfg.out_dir);

    PropagatorSpec fine_spec;
    fine_spec.scheme = cfg.scheme;
    fine_spec.steps_per_interval =
        static_cast<int>(std::llround(cfg.steps_per_period * cfg.horizon_periods));

    PararealConfig pcfg;
    pcfg.n_subintervals = cfg.n_subintervals;
    pcfg.threshold = cfg.threshold;
    pcfg.max_iterations = cfg.max_iterations;
    pcfg.fine.scheme = cfg.scheme;
    pcfg.fine.steps_per_interval = std::max(1, cfg.steps_per_period / cfg.n_subintervals);
    pcfg.coarse.scheme = cfg.scheme;
    pcfg.coarse.steps_per_interval = std::max(1, cfg.coarse_steps_per_period / cfg.n_subintervals);

    std::vector<std::pair<std::string, Real>> timings;
    ExperimentResult result;
    result.period = period;
    result.horizon = horizon;

    Stopwatch transient_watch;
    const Trajectory forward = integrate(sys, Vec::Zero(sys.dim()), 0.0, horizon, fine_spec);
    timings.emplace_back("transient", transient_watch.seconds());

    write_text_file(out_dir / "vout.csv", [&](std::ostream& out) {
        out << "t,vout\n";
        for (std::size_t k = 0; k < forward.size(); ++k)
            out << fmt(forward.grid[k]) << ',' << fmt(qoi.selector.dot(forward.states[k])) << '\n';
    });

    const Real window_a = horizon - period;
    const Real window_b = horizon;
    std::map<Method, std::vector<Real>> values;

    for (const Method m : cfg.methods) {
        Stopwatch watch;
        try {
            switch (m) {
            case Method::Dsa: {
                const auto sens = dsa(sys, forward, params);
                std::vector<Real> v(params.size());
                for (std::size_t i = 0; i < params.size(); ++i) {
                    v[i] = integrate_qoi(sens[i], qoi, window_a, window_b);
                    write_text_file(out_dir / ("sens_" + params[i].name + ".csv"),
                                    [&](std::ostream& out) {
                                        out << "t,dudp\n";
                                        for (std::size_t k = 0; k < sens[i].size(); ++k)
                                            out << fmt(sens[i].grid[k]) << ','
                                                << fmt(qoi.selector.dot(sens[i].states[k])) << '\n';
                                    });
                }
                values[m] = std::move(v);
                break;
            }
            case Method::AsaTransient:
                values[m] = asa_transient(sys, forward, qoi, params, 0.0, horizon);
                break;
            case Method::AsaPeriodicLiterature:
                values[m] = asa_periodic_literature(sys, forward, qoi, params, period);
                break;
            case Method::AsaPeriodic: {
                PeriodicRunInfo info;
                const PeriodicSolution sol = solve_periodic(sys, qoi, horizon, period, pcfg, &info);
                write_text_file(out_dir / "pppc_history.csv", [&](std::ostream& out) {
                    write_history_csv(out, info.adjoint_history);
                });
                write_text_file(out_dir / "pppc_history_forward.csv", [&](std::ostream& out) {
                    write_history_csv(out, info.forward_history);
                });
                if (!info.converged)
                    throw std::runtime_error(
                        "PP-PC did not converge within max_iterations (metric history in pppc_history.csv)");
                values[m] = asa_periodic(sol, sys, params);
                break;
            }
            case Method::Fd: {
                FdRunSpec run;
                run.mode = FdMode::Transient;
                run.t0 = 0.0;
                run.t1 = horizon;
                run.propagator = fine_spec;
                run.pppc = pcfg;
                std::vector<Real> v(params.size());
                for (std::size_t i = 0; i < params.size(); ++i)
                    v[i] = fd_oracle(circuit, params[i], cfg.h_rel, qoi, window_a, window_b, run);
                values[m] = std::move(v);
                break;
            }
            }
        } catch (const std::exception& e) {
            result.failures.push_back(method_name(m) + ": " + e.what());
        }
        timings.emplace_back(method_name(m), watch.seconds());
    }

    // reference: dsa when available, else fd, else the first computed method
    std::optional<Method> ref;
    for (const Method m : {Method::Dsa, Method::Fd}) {
        if (values.count(m) != 0) {
            ref = m;
            break;
        }
    }
    if (!ref && !values.empty()) ref = values.begin()->first;

    SensitivityReport& report = result.report;
    report.window_begin = window_a;
    report.window_end = window_b;
    report.period = period;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (const Method m : cfg.methods) {
            if (values.count(m) == 0) continue;
            SensitivityEntry e;
            e.parameter = params[i].name;
            e.method = method_name(m);
            e.value_raw = values[m][i];
            e.nominal = params[i].nominal;
            const Real window_periods = m == Method::AsaTransient ? cfg.horizon_periods : 1.0;
            e.value_per_period = e.value_raw / window_periods;
            if (ref && m != *ref) {
                const Real ref_periods = *ref == Method::AsaTransient ? cfg.horizon_periods : 1.0;
                const Real ref_per_period = values[*ref][i] / ref_periods;
                e.ref_method = method_name(*ref);
                e.rel_error = std::abs(e.value_per_period - ref_per_period) /
                              std::max(std::abs(ref_per_period), 1e-300);
            }
            report.entries.push_back(std::move(e));
        }
    }

    write_text_file(out_dir / "report.csv", [&](std::ostream& out) { report.write_csv(out); });
    write_text_file(out_dir / "timing.csv", [&](std::ostream& out) {
        out << "stage,seconds\n";
        for (const auto& [stage, secs] : timings) out << stage << ',' << fmt(secs) << '\n';
    });

    result.exit_code = result.failures.empty() ? 0 : 2;
    return result;
}

} // namespace pasa
