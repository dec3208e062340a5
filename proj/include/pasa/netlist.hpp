#pragma once

#include "pasa/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pasa {

/// Parse or validation failure; message carries the netlist line number
/// when the error originates from text input.
struct NetlistError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DeviceKind {
    Resistor,
    Capacitor,
    Inductor,
    VoltageSource,
    CurrentSource,
    PwmSwitch,
    Diode,
};

enum class SourceShape { Dc, Sine };

struct Waveform {
    SourceShape shape = SourceShape::Dc;
    Real offset = 0.0;
    Real amplitude = 0.0;
    Real frequency = 0.0;

    [[nodiscard]] Real value(Real t) const;
};

struct Device {
    DeviceKind kind{};
    std::string label;
    int node_pos = 0;
    int node_neg = 0;
    Real value = 0.0;                // R [ohm], C [F], L [H]
    Waveform waveform;               // voltage/current sources
    Real frequency = 0.0;            // pwm switch [Hz]
    Real duty = 0.0;                 // pwm switch, in (0,1)
    Real r_on = 1e-3;                // pwm switch on-resistance
    Real r_off = 1e6;                // pwm switch off-resistance
    Real saturation_current = 1e-12; // diode I_s
    Real thermal_voltage = 25.85e-3; // diode V_T
    int param_index = -1;            // slot in Circuit::params(), -1 = none
};

/// A named, differentiable design parameter bound to one device value.
struct ParamDescriptor {
    std::string name;
    Real nominal = 0.0;
    int device_index = -1;
};

/// Device list with named parameters. Ground is node 0 and is excluded
/// from the MNA unknowns; node_count() is the number of non-ground nodes.
/// Immutable once built (the add_* calls are construction steps); safe to
/// share read-only across threads.
class Circuit {
public:
    Circuit() = default;

    int add_resistor(const std::string& label, int np, int nn, Real ohms);
    int add_capacitor(const std::string& label, int np, int nn, Real farads);
    int add_inductor(const std::string& label, int np, int nn, Real henries);
    int add_voltage_source_dc(const std::string& label, int np, int nn, Real volts);
    int add_voltage_source_sine(const std::string& label, int np, int nn,
                                Real offset, Real amplitude, Real hertz);
    int add_current_source_dc(const std::string& label, int np, int nn, Real amps);
    int add_pwm_switch(const std::string& label, int np, int nn, Real hertz, Real duty,
                       Real r_on = 1e-3, Real r_off = 1e6);
    int add_diode(const std::string& label, int np, int nn,
                  Real saturation_current = 1e-12, Real thermal_voltage = 25.85e-3);

    [[nodiscard]] const std::vector<Device>& devices() const { return devices_; }
    [[nodiscard]] const std::vector<ParamDescriptor>& params() const { return params_; }
    [[nodiscard]] int node_count() const { return node_count_; }

    [[nodiscard]] const ParamDescriptor& param(const std::string& name) const;
    [[nodiscard]] bool has_param(const std::string& name) const;

    /// Copy with one parameter nominal (and the owning device value) replaced.
    [[nodiscard]] Circuit with_param_value(const std::string& name, Real value) const;

    /// Reorder the parameter list; names must be a permutation of the
    /// registered names. Device back-references are remapped.
    void reorder_params(const std::vector<std::string>& names);

    /// Common period of all PWM and sinusoidal sources, if one exists.
    [[nodiscard]] std::optional<Real> fundamental_period() const;

    [[nodiscard]] bool has_independent_source() const;

    /// Structural checks beyond per-device ones: contiguous node indices,
    /// ground referenced, unique labels. Throws NetlistError.
    void validate() const;

private:
    int add_device(Device dev, bool register_param);
    void check_nodes(const std::string& label, int np, int nn) const;

    std::vector<Device> devices_;
    std::vector<ParamDescriptor> params_;
    int node_count_ = 0;
};

/// Parse the line-oriented netlist format (`*` comments):
///   R<label> n+ n- <ohms>            C<label> n+ n- <farads>
///   L<label> n+ n- <henries>         I<label> n+ n- DC <amps>
///   V<label> n+ n- DC <volts>        V<label> n+ n- SIN <offset> <ampl> <hertz>
///   S<label> n+ n- PWM f=<hertz> d=<fraction> [ron=<ohms>] [roff=<ohms>]
///   D<label> n+ n- [is=<amps>] [vt=<volts>]
/// Parameters are auto-registered for R, L, C devices, named by label.
Circuit parse_netlist(const std::string& text);

/// Emit a netlist in the grammar above; parse(serialize(c)) round-trips the
/// device list and parameter nominals.
std::string serialize_netlist(const Circuit& circuit);

/// DCDC buck converter: DC source vin, PWM switch at fs, freewheeling diode,
/// series L with parasitic RL, shunt C, load R. Output voltage is node 4.
/// Parameters are registered as {R, R_L, L, C} in that order.
Circuit build_buck_converter(Real vin, Real fs, Real inductance, Real r_parasitic,
                             Real capacitance, Real r_load, Real duty = 0.5,
                             Real r_on = 1e-3, Real r_off = 1e6,
                             Real diode_is = 1e-12, Real diode_vt = 25.85e-3);

/// Registered parameters in deterministic (registration) order.
std::vector<ParamDescriptor> list_parameters(const Circuit& circuit);

/// Output node index of the reference buck converter.
inline constexpr int kBuckOutputNode = 4;

} // namespace pasa
