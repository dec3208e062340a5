#include "pasa/netlist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pasa {

namespace {

std::string shortest_repr(Real v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw NetlistError("netlist line " + std::to_string(line) + ": " + msg);
}

Real parse_number(const std::string& tok, int line, const char* what) {
    char* end = nullptr;
    const Real v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail(line, std::string("bad ") + what + " '" + tok + "'");
    if (!std::isfinite(v)) fail(line, std::string("non-finite ") + what + " '" + tok + "'");
    return v;
}

int parse_node(const std::string& tok, int line) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v < 0) fail(line, "bad node index '" + tok + "'");
    return static_cast<int>(v);
}

// "key=value" pair; returns false when tok has no '='.
bool split_kv(const std::string& tok, std::string& key, std::string& val) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) return false;
    key = tok.substr(0, eq);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    val = tok.substr(eq + 1);
    return true;
}

} // namespace

Real Waveform::value(Real t) const {
    switch (shape) {
    case SourceShape::Dc: return offset;
    case SourceShape::Sine: return offset + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t);
    }
    return 0.0;
}

int Circuit::add_device(Device dev, bool register_param) {
    for (const auto& d : devices_) {
        if (d.label == dev.label) throw NetlistError("duplicate device label '" + dev.label + "'");
    }
    node_count_ = std::max({node_count_, dev.node_pos, dev.node_neg});
    const int index = static_cast<int>(devices_.size());
    if (register_param) {
        for (const auto& p : params_) {
            if (p.name == dev.label) throw NetlistError("duplicate parameter name '" + dev.label + "'");
        }
        dev.param_index = static_cast<int>(params_.size());
        params_.push_back({dev.label, dev.value, index});
    }
    devices_.push_back(std::move(dev));
    return index;
}

void Circuit::check_nodes(const std::string& label, int np, int nn) const {
    if (np < 0 || nn < 0) throw NetlistError("device '" + label + "': negative node index");
    if (np == nn) throw NetlistError("device '" + label + "': both terminals on node " + std::to_string(np));
}

int Circuit::add_resistor(const std::string& label, int np, int nn, Real ohms) {
    check_nodes(label, np, nn);
    if (!(ohms > 0.0)) throw NetlistError("resistor '" + label + "': non-positive element value");
    Device d;
    d.kind = DeviceKind::Resistor;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.value = ohms;
    return add_device(std::move(d), true);
}

int Circuit::add_capacitor(const std::string& label, int np, int nn, Real farads) {
    check_nodes(label, np, nn);
    if (!(farads > 0.0)) throw NetlistError("capacitor '" + label + "': non-positive element value");
    Device d;
    d.kind = DeviceKind::Capacitor;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.value = farads;
    return add_device(std::move(d), true);
}

int Circuit::add_inductor(const std::string& label, int np, int nn, Real henries) {
    check_nodes(label, np, nn);
    if (!(henries > 0.0)) throw NetlistError("inductor '" + label + "': non-positive element value");
    Device d;
    d.kind = DeviceKind::Inductor;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.value = henries;
    return add_device(std::move(d), true);
}

int Circuit::add_voltage_source_dc(const std::string& label, int np, int nn, Real volts) {
    check_nodes(label, np, nn);
    Device d;
    d.kind = DeviceKind::VoltageSource;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.waveform = {SourceShape::Dc, volts, 0.0, 0.0};
    return add_device(std::move(d), false);
}

int Circuit::add_voltage_source_sine(const std::string& label, int np, int nn,
                                     Real offset, Real amplitude, Real hertz) {
    check_nodes(label, np, nn);
    if (!(hertz > 0.0)) throw NetlistError("source '" + label + "': frequency must be positive");
    Device d;
    d.kind = DeviceKind::VoltageSource;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.waveform = {SourceShape::Sine, offset, amplitude, hertz};
    return add_device(std::move(d), false);
}

int Circuit::add_current_source_dc(const std::string& label, int np, int nn, Real amps) {
    check_nodes(label, np, nn);
    Device d;
    d.kind = DeviceKind::CurrentSource;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.waveform = {SourceShape::Dc, amps, 0.0, 0.0};
    return add_device(std::move(d), false);
}

int Circuit::add_pwm_switch(const std::string& label, int np, int nn, Real hertz, Real duty,
                            Real r_on, Real r_off) {
    check_nodes(label, np, nn);
    if (!(hertz > 0.0)) throw NetlistError("switch '" + label + "': frequency must be positive");
    if (!(duty > 0.0 && duty < 1.0)) throw NetlistError("switch '" + label + "': duty must lie in (0,1)");
    if (!(r_on > 0.0 && r_off > 0.0 && r_on < r_off))
        throw NetlistError("switch '" + label + "': need 0 < ron < roff");
    Device d;
    d.kind = DeviceKind::PwmSwitch;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.frequency = hertz;
    d.duty = duty;
    d.r_on = r_on;
    d.r_off = r_off;
    return add_device(std::move(d), false);
}

int Circuit::add_diode(const std::string& label, int np, int nn,
                       Real saturation_current, Real thermal_voltage) {
    check_nodes(label, np, nn);
    if (!(saturation_current > 0.0)) throw NetlistError("diode '" + label + "': saturation current must be positive");
    if (!(thermal_voltage > 0.0)) throw NetlistError("diode '" + label + "': thermal voltage must be positive");
    Device d;
    d.kind = DeviceKind::Diode;
    d.label = label;
    d.node_pos = np;
    d.node_neg = nn;
    d.saturation_current = saturation_current;
    d.thermal_voltage = thermal_voltage;
    return add_device(std::move(d), false);
}

const ParamDescriptor& Circuit::param(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p;
    }
    throw NetlistError("unknown parameter '" + name + "'");
}

bool Circuit::has_param(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(),
                       [&](const ParamDescriptor& p) { return p.name == name; });
}

Circuit Circuit::with_param_value(const std::string& name, Real value) const {
    Circuit copy = *this;
    for (std::size_t i = 0; i < copy.params_.size(); ++i) {
        if (copy.params_[i].name != name) continue;
        Device& dev = copy.devices_.at(static_cast<std::size_t>(copy.params_[i].device_index));
        if (!(value > 0.0))
            throw NetlistError("parameter '" + name + "': non-positive element value");
        copy.params_[i].nominal = value;
        dev.value = value;
        return copy;
    }
    throw NetlistError("unknown parameter '" + name + "'");
}

void Circuit::reorder_params(const std::vector<std::string>& names) {
    if (names.size() != params_.size())
        throw NetlistError("reorder_params: name list does not match registered parameters");
    std::vector<ParamDescriptor> reordered;
    reordered.reserve(params_.size());
    for (const auto& name : names) reordered.push_back(param(name));
    params_ = std::move(reordered);
    for (std::size_t i = 0; i < params_.size(); ++i)
        devices_[static_cast<std::size_t>(params_[i].device_index)].param_index = static_cast<int>(i);
}

std::optional<Real> Circuit::fundamental_period() const {
    std::vector<Real> freqs;
    for (const auto& d : devices_) {
        if (d.kind == DeviceKind::PwmSwitch) freqs.push_back(d.frequency);
        else if ((d.kind == DeviceKind::VoltageSource || d.kind == DeviceKind::CurrentSource) &&
                 d.waveform.shape == SourceShape::Sine)
            freqs.push_back(d.waveform.frequency);
    }
    if (freqs.empty()) return std::nullopt;
    const Real f_min = *std::min_element(freqs.begin(), freqs.end());
    // Smallest multiple of the slowest period commensurate with every source.
    for (int k = 1; k <= 1000; ++k) {
        const Real period = static_cast<Real>(k) / f_min;
        const bool ok = std::all_of(freqs.begin(), freqs.end(), [&](Real f) {
            const Real cycles = period * f;
            return std::abs(cycles - std::round(cycles)) < 1e-9 * cycles;
        });
        if (ok) return period;
    }
    return std::nullopt;
}

bool Circuit::has_independent_source() const {
    return std::any_of(devices_.begin(), devices_.end(), [](const Device& d) {
        return d.kind == DeviceKind::VoltageSource || d.kind == DeviceKind::CurrentSource;
    });
}

void Circuit::validate() const {
    std::vector<int> touched(static_cast<std::size_t>(node_count_) + 1, 0);
    for (const auto& d : devices_) {
        touched[static_cast<std::size_t>(d.node_pos)]++;
        touched[static_cast<std::size_t>(d.node_neg)]++;
    }
    for (int n = 1; n <= node_count_; ++n) {
        if (touched[static_cast<std::size_t>(n)] == 0)
            throw NetlistError("dangling node " + std::to_string(n) + ": no device references it");
    }
    if (node_count_ > 0 && touched[0] == 0)
        throw NetlistError("no device terminal references ground (node 0)");
}

Circuit parse_netlist(const std::string& text) {
    Circuit circuit;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::istringstream ls(raw);
        std::vector<std::string> tok;
        std::string t;
        while (ls >> t) tok.push_back(t);
        if (tok.empty() || tok[0][0] == '*') continue;

        const std::string& label = tok[0];
        const char kind = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
        if (tok.size() < 3) fail(line_no, "expected at least 'label n+ n-'");
        const int np = parse_node(tok[1], line_no);
        const int nn = parse_node(tok[2], line_no);

        try {
            switch (kind) {
            case 'R':
            case 'C':
            case 'L': {
                if (tok.size() != 4) fail(line_no, "expected '" + std::string(1, kind) + "<label> n+ n- <value>'");
                const Real v = parse_number(tok[3], line_no, "element value");
                if (kind == 'R') circuit.add_resistor(label, np, nn, v);
                else if (kind == 'C') circuit.add_capacitor(label, np, nn, v);
                else circuit.add_inductor(label, np, nn, v);
                break;
            }
            case 'V': {
                if (tok.size() == 5 && (tok[3] == "DC" || tok[3] == "dc")) {
                    circuit.add_voltage_source_dc(label, np, nn, parse_number(tok[4], line_no, "voltage"));
                } else if (tok.size() == 7 && (tok[3] == "SIN" || tok[3] == "sin")) {
                    circuit.add_voltage_source_sine(label, np, nn,
                                                    parse_number(tok[4], line_no, "offset"),
                                                    parse_number(tok[5], line_no, "amplitude"),
                                                    parse_number(tok[6], line_no, "frequency"));
                } else {
                    fail(line_no, "expected 'V<label> n+ n- DC <v>' or 'V<label> n+ n- SIN <off> <ampl> <hz>'");
                }
                break;
            }
            case 'I': {
                if (tok.size() != 5 || (tok[3] != "DC" && tok[3] != "dc"))
                    fail(line_no, "expected 'I<label> n+ n- DC <amps>'");
                circuit.add_current_source_dc(label, np, nn, parse_number(tok[4], line_no, "current"));
                break;
            }
            case 'S': {
                if (tok.size() < 6 || (tok[3] != "PWM" && tok[3] != "pwm"))
                    fail(line_no, "expected 'S<label> n+ n- PWM f=<hz> d=<duty> [ron=] [roff=]'");
                Real f = 0.0, d = 0.0, ron = 1e-3, roff = 1e6;
                bool have_f = false, have_d = false;
                for (std::size_t i = 4; i < tok.size(); ++i) {
                    std::string key, val;
                    if (!split_kv(tok[i], key, val)) fail(line_no, "bad switch option '" + tok[i] + "'");
                    const Real v = parse_number(val, line_no, key.c_str());
                    if (key == "f") { f = v; have_f = true; }
                    else if (key == "d") { d = v; have_d = true; }
                    else if (key == "ron") ron = v;
                    else if (key == "roff") roff = v;
                    else fail(line_no, "unknown switch option '" + key + "'");
                }
                if (!have_f || !have_d) fail(line_no, "switch requires f= and d=");
                circuit.add_pwm_switch(label, np, nn, f, d, ron, roff);
                break;
            }
            case 'D': {
                Real is = 1e-12, vt = 25.85e-3;
                for (std::size_t i = 3; i < tok.size(); ++i) {
                    std::string key, val;
                    if (!split_kv(tok[i], key, val)) fail(line_no, "bad diode option '" + tok[i] + "'");
                    const Real v = parse_number(val, line_no, key.c_str());
                    if (key == "is") is = v;
                    else if (key == "vt") vt = v;
                    else fail(line_no, "unknown diode option '" + key + "'");
                }
                circuit.add_diode(label, np, nn, is, vt);
                break;
            }
            default:
                fail(line_no, std::string("unknown device kind '") + label[0] + "'");
            }
        } catch (const NetlistError& e) {
            const std::string what = e.what();
            if (what.rfind("netlist line", 0) == 0) throw;
            fail(line_no, what);
        }
    }
    circuit.validate();
    return circuit;
}

std::string serialize_netlist(const Circuit& circuit) {
    std::ostringstream out;
    for (const auto& d : circuit.devices()) {
        switch (d.kind) {
        case DeviceKind::Resistor:
        case DeviceKind::Capacitor:
        case DeviceKind::Inductor:
            out << d.label << ' ' << d.node_pos << ' ' << d.node_neg << ' '
                << shortest_repr(d.value) << '\n';
            break;
        case DeviceKind::VoltageSource:
            if (d.waveform.shape == SourceShape::Dc)
                out << d.label << ' ' << d.node_pos << ' ' << d.node_neg << " DC "
                    << shortest_repr(d.waveform.offset) << '\n';
            else
                out << d.label << ' ' << d.node_pos << ' ' << d.node_neg << " SIN "
                    << shortest_repr(d.waveform.offset) << ' '
                    << shortest_repr(d.waveform.amplitude) << ' '
                    << shortest_repr(d.waveform.frequency) << '\n';
            break;
        case DeviceKind::CurrentSource:
            out << d.label << ' ' << d.node_pos << ' ' << d.node_neg << " DC "
                << shortest_repr(d.waveform.offset) << '\n';
            break;
        case DeviceKind::PwmSwitch:
            out << d.label << ' ' << d.node_pos << ' ' << d.node_neg << " PWM f="
                << shortest_repr(d.frequency) << " d=" << shortest_repr(d.duty)
                << " ron=" << shortest_repr(d.r_on) << " roff=" << shortest_repr(d.r_off) << '\n';
            break;
        case DeviceKind::Diode:
            out << d.label << ' ' << d.node_pos << ' ' << d.node_neg << " is="
                << shortest_repr(d.saturation_current) << " vt="
                << shortest_repr(d.thermal_voltage) << '\n';
            break;
        }
    }
    return out.str();
}

Circuit build_buck_converter(Real vin, Real fs, Real inductance, Real r_parasitic,
                             Real capacitance, Real r_load, Real duty,
                             Real r_on, Real r_off, Real diode_is, Real diode_vt) {
    Circuit c;
    c.add_voltage_source_dc("V1", 1, 0, vin);
    c.add_pwm_switch("S1", 1, 2, fs, duty, r_on, r_off);
    c.add_diode("D1", 0, 2, diode_is, diode_vt);
    c.add_inductor("L", 2, 3, inductance);
    c.add_resistor("R_L", 3, 4, r_parasitic);
    c.add_capacitor("C", 4, 0, capacitance);
    c.add_resistor("R", 4, 0, r_load);
    c.reorder_params({"R", "R_L", "L", "C"});
    c.validate();
    return c;
}

std::vector<ParamDescriptor> list_parameters(const Circuit& circuit) {
    return circuit.params();
}

} // namespace pasa
