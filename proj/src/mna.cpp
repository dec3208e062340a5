#include "pasa/mna.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pasa {

namespace {

constexpr Real kDiodeClampFactor = 40.0; // exp argument limited to 40·V_T
constexpr Real kPhaseSnap = 1e-9;        // PWM edge snap, fraction of a period

struct DiodeEval {
    Real current;
    Real tangent;
    Real secant;
};

DiodeEval eval_diode(const Device& d, Real v) {
    const Real vt = d.thermal_voltage;
    const Real is = d.saturation_current;
    const Real v_max = kDiodeClampFactor * vt;
    DiodeEval e{};
    if (v <= v_max) {
        const Real ex = std::exp(v / vt);
        e.current = is * std::expm1(v / vt);
        e.tangent = is / vt * ex;
    } else {
        // linear extension beyond the clamp keeps i and di/dv continuous
        const Real ex = std::exp(kDiodeClampFactor);
        e.tangent = is / vt * ex;
        e.current = is * (ex - 1.0) + e.tangent * (v - v_max);
    }
    e.secant = (std::abs(v) > 1e-12 * vt) ? e.current / v : is / vt;
    return e;
}

bool pwm_on(const Device& d, Real t) {
    const Real cycles = t * d.frequency;
    Real phase = cycles - std::floor(cycles);
    if (phase < kPhaseSnap || phase > 1.0 - kPhaseSnap) phase = 0.0;
    else if (std::abs(phase - d.duty) < kPhaseSnap) phase = d.duty;
    return phase > 0.0 && phase <= d.duty;
}

Real pwm_conductance(const Device& d, Real t) {
    return pwm_on(d, t) ? 1.0 / d.r_on : 1.0 / d.r_off;
}

} // namespace

Vec DaeSystem::residual(const Vec& x, const Vec& xdot, Real t) const {
    if (x.size() != dim() || xdot.size() != dim())
        throw std::invalid_argument("residual: state dimension mismatch");
    return capacitance(xdot, t) * xdot + conduction(x, t) - source(t);
}

std::vector<Real> DaeSystem::discontinuities(Real, Real) const { return {}; }

MnaSystem::MnaSystem(Circuit circuit) : circuit_(std::move(circuit)) {
    circuit_.validate();
    branch_of_device_.assign(circuit_.devices().size(), -1);
    int next_branch = circuit_.node_count();
    for (std::size_t i = 0; i < circuit_.devices().size(); ++i) {
        const auto& d = circuit_.devices()[i];
        if (d.kind == DeviceKind::VoltageSource || d.kind == DeviceKind::Inductor)
            branch_of_device_[i] = next_branch++;
        if (d.kind == DeviceKind::Diode || d.kind == DeviceKind::PwmSwitch) lti_ = false;
    }
    dim_ = next_branch;
}

Mat MnaSystem::capacitance(const Vec&, Real) const {
    Mat jc = Mat::Zero(dim_, dim_);
    for (std::size_t i = 0; i < circuit_.devices().size(); ++i) {
        const auto& d = circuit_.devices()[i];
        if (d.kind == DeviceKind::Capacitor) {
            const int a = d.node_pos - 1, b = d.node_neg - 1;
            if (a >= 0) jc(a, a) += d.value;
            if (b >= 0) jc(b, b) += d.value;
            if (a >= 0 && b >= 0) {
                jc(a, b) -= d.value;
                jc(b, a) -= d.value;
            }
        } else if (d.kind == DeviceKind::Inductor) {
            const int br = branch_of_device_[i];
            jc(br, br) += d.value;
        }
    }
    return jc;
}

Vec MnaSystem::conduction(const Vec& x, Real t) const {
    if (x.size() != dim_) throw std::invalid_argument("conduction: state dimension mismatch");
    Vec g = Vec::Zero(dim_);
    auto vnode = [&](int node) { return node > 0 ? x(node - 1) : 0.0; };
    for (std::size_t i = 0; i < circuit_.devices().size(); ++i) {
        const auto& d = circuit_.devices()[i];
        const int a = d.node_pos - 1, b = d.node_neg - 1;
        switch (d.kind) {
        case DeviceKind::Resistor:
        case DeviceKind::PwmSwitch: {
            const Real cond = d.kind == DeviceKind::Resistor ? 1.0 / d.value : pwm_conductance(d, t);
            const Real current = cond * (vnode(d.node_pos) - vnode(d.node_neg));
            if (a >= 0) g(a) += current;
            if (b >= 0) g(b) -= current;
            break;
        }
        case DeviceKind::Diode: {
            const Real v = vnode(d.node_pos) - vnode(d.node_neg);
            const Real current = eval_diode(d, v).current;
            if (a >= 0) g(a) += current;
            if (b >= 0) g(b) -= current;
            break;
        }
        case DeviceKind::VoltageSource: {
            const int br = branch_of_device_[i];
            const Real i_br = x(br);
            if (a >= 0) g(a) += i_br;
            if (b >= 0) g(b) -= i_br;
            g(br) += vnode(d.node_pos) - vnode(d.node_neg);
            break;
        }
        case DeviceKind::Inductor: {
            const int br = branch_of_device_[i];
            const Real i_br = x(br);
            if (a >= 0) g(a) += i_br;
            if (b >= 0) g(b) -= i_br;
            g(br) -= vnode(d.node_pos) - vnode(d.node_neg);
            break;
        }
        case DeviceKind::CurrentSource:
            break; // right-hand side only
        }
    }
    return g;
}

Mat MnaSystem::conduction_jacobian(const Vec& x, Real t) const {
    if (x.size() != dim_) throw std::invalid_argument("conduction_jacobian: state dimension mismatch");
    Mat jg = Mat::Zero(dim_, dim_);
    auto vnode = [&](int node) { return node > 0 ? x(node - 1) : 0.0; };
    auto stamp_conductance = [&](int a, int b, Real cond) {
        if (a >= 0) jg(a, a) += cond;
        if (b >= 0) jg(b, b) += cond;
        if (a >= 0 && b >= 0) {
            jg(a, b) -= cond;
            jg(b, a) -= cond;
        }
    };
    for (std::size_t i = 0; i < circuit_.devices().size(); ++i) {
        const auto& d = circuit_.devices()[i];
        const int a = d.node_pos - 1, b = d.node_neg - 1;
        switch (d.kind) {
        case DeviceKind::Resistor:
            stamp_conductance(a, b, 1.0 / d.value);
            break;
        case DeviceKind::PwmSwitch:
            stamp_conductance(a, b, pwm_conductance(d, t));
            break;
        case DeviceKind::Diode: {
            const Real v = vnode(d.node_pos) - vnode(d.node_neg);
            stamp_conductance(a, b, eval_diode(d, v).tangent);
            break;
        }
        case DeviceKind::VoltageSource: {
            const int br = branch_of_device_[i];
            if (a >= 0) { jg(a, br) += 1.0; jg(br, a) += 1.0; }
            if (b >= 0) { jg(b, br) -= 1.0; jg(br, b) -= 1.0; }
            break;
        }
        case DeviceKind::Inductor: {
            const int br = branch_of_device_[i];
            if (a >= 0) { jg(a, br) += 1.0; jg(br, a) -= 1.0; }
            if (b >= 0) { jg(b, br) -= 1.0; jg(br, b) += 1.0; }
            break;
        }
        case DeviceKind::CurrentSource:
            break;
        }
    }
    return jg;
}

Mat MnaSystem::conductance(const Vec& x, Real t) const {
    if (x.size() != dim_) throw std::invalid_argument("conductance: state dimension mismatch");
    Mat jg = conduction_jacobian(x, t);
    auto vnode = [&](int node) { return node > 0 ? x(node - 1) : 0.0; };
    // replace each diode's tangent stamp by the secant so J_G·x reproduces
    // the exact device current
    for (const auto& d : circuit_.devices()) {
        if (d.kind != DeviceKind::Diode) continue;
        const int a = d.node_pos - 1, b = d.node_neg - 1;
        const Real v = vnode(d.node_pos) - vnode(d.node_neg);
        const auto e = eval_diode(d, v);
        const Real delta = e.secant - e.tangent;
        if (a >= 0) jg(a, a) += delta;
        if (b >= 0) jg(b, b) += delta;
        if (a >= 0 && b >= 0) {
            jg(a, b) -= delta;
            jg(b, a) -= delta;
        }
    }
    return jg;
}

Vec MnaSystem::source(Real t) const {
    Vec is = Vec::Zero(dim_);
    for (std::size_t i = 0; i < circuit_.devices().size(); ++i) {
        const auto& d = circuit_.devices()[i];
        if (d.kind == DeviceKind::VoltageSource) {
            is(branch_of_device_[i]) += d.waveform.value(t);
        } else if (d.kind == DeviceKind::CurrentSource) {
            const Real amps = d.waveform.value(t);
            const int a = d.node_pos - 1, b = d.node_neg - 1;
            if (a >= 0) is(a) -= amps;
            if (b >= 0) is(b) += amps;
        }
    }
    return is;
}

std::vector<Real> MnaSystem::discontinuities(Real t0, Real t1) const {
    std::vector<Real> edges;
    const Real tol = 1e-12 * (t1 - t0);
    for (const auto& d : circuit_.devices()) {
        if (d.kind != DeviceKind::PwmSwitch) continue;
        const Real period = 1.0 / d.frequency;
        const auto k0 = static_cast<long>(std::floor(t0 / period)) - 1;
        const auto k1 = static_cast<long>(std::ceil(t1 / period)) + 1;
        for (long k = k0; k <= k1; ++k) {
            for (const Real e : {static_cast<Real>(k) * period,
                                 (static_cast<Real>(k) + d.duty) * period}) {
                if (e > t0 + tol && e < t1 - tol) edges.push_back(e);
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [&](Real u, Real v) { return std::abs(u - v) <= tol; }),
                edges.end());
    return edges;
}

std::optional<Real> MnaSystem::period() const { return circuit_.fundamental_period(); }

bool MnaSystem::time_invariant_linear() const { return lti_; }

const ParamDescriptor& MnaSystem::resolve_param(const ParamDescriptor& p) const {
    const ParamDescriptor& own = circuit_.param(p.name); // throws for unknown names
    return own;
}

Mat MnaSystem::djc_dp(const ParamDescriptor& p) const {
    const ParamDescriptor& own = resolve_param(p);
    const auto& d = circuit_.devices()[static_cast<std::size_t>(own.device_index)];
    Mat m = Mat::Zero(dim_, dim_);
    if (d.kind == DeviceKind::Capacitor) {
        const int a = d.node_pos - 1, b = d.node_neg - 1;
        if (a >= 0) m(a, a) += 1.0;
        if (b >= 0) m(b, b) += 1.0;
        if (a >= 0 && b >= 0) {
            m(a, b) -= 1.0;
            m(b, a) -= 1.0;
        }
    } else if (d.kind == DeviceKind::Inductor) {
        const int br = branch_of_device_[static_cast<std::size_t>(own.device_index)];
        m(br, br) += 1.0;
    }
    return m;
}

Mat MnaSystem::djg_dp(const ParamDescriptor& p) const {
    const ParamDescriptor& own = resolve_param(p);
    const auto& d = circuit_.devices()[static_cast<std::size_t>(own.device_index)];
    Mat m = Mat::Zero(dim_, dim_);
    if (d.kind == DeviceKind::Resistor) {
        const Real dg = -1.0 / (d.value * d.value);
        const int a = d.node_pos - 1, b = d.node_neg - 1;
        if (a >= 0) m(a, a) += dg;
        if (b >= 0) m(b, b) += dg;
        if (a >= 0 && b >= 0) {
            m(a, b) -= dg;
            m(b, a) -= dg;
        }
    }
    return m;
}

Vec MnaSystem::param_stamp_action(const ParamDescriptor& p, const Vec& x,
                                  const Vec& xdot, Real) const {
    if (x.size() != dim_ || xdot.size() != dim_)
        throw std::invalid_argument("param_stamp_action: state dimension mismatch");
    const ParamDescriptor& own = resolve_param(p);
    const auto& d = circuit_.devices()[static_cast<std::size_t>(own.device_index)];
    Vec action = Vec::Zero(dim_);
    auto diff = [](const Vec& v, int np, int nn) {
        const Real vp = np > 0 ? v(np - 1) : 0.0;
        const Real vn = nn > 0 ? v(nn - 1) : 0.0;
        return vp - vn;
    };
    const int a = d.node_pos - 1, b = d.node_neg - 1;
    switch (d.kind) {
    case DeviceKind::Resistor: {
        const Real flow = -1.0 / (d.value * d.value) * diff(x, d.node_pos, d.node_neg);
        if (a >= 0) action(a) += flow;
        if (b >= 0) action(b) -= flow;
        break;
    }
    case DeviceKind::Capacitor: {
        const Real flow = diff(xdot, d.node_pos, d.node_neg);
        if (a >= 0) action(a) += flow;
        if (b >= 0) action(b) -= flow;
        break;
    }
    case DeviceKind::Inductor: {
        const int br = branch_of_device_[static_cast<std::size_t>(own.device_index)];
        action(br) += xdot(br);
        break;
    }
    default:
        throw NetlistError("parameter '" + own.name + "' is not attached to an R, L, or C device");
    }
    return action;
}

QoiSpec MnaSystem::node_voltage_qoi(int node) const {
    if (node < 1 || node > circuit_.node_count())
        throw std::invalid_argument("node_voltage_qoi: node " + std::to_string(node) +
                                    " outside 1.." + std::to_string(circuit_.node_count()));
    Vec q = Vec::Zero(dim_);
    q(node - 1) = 1.0;
    return QoiSpec{std::move(q)};
}

int MnaSystem::branch_index(const std::string& label) const {
    for (std::size_t i = 0; i < circuit_.devices().size(); ++i) {
        if (circuit_.devices()[i].label == label) {
            const int br = branch_of_device_[i];
            if (br < 0) throw std::invalid_argument("device '" + label + "' has no branch current");
            return br;
        }
    }
    throw std::invalid_argument("unknown device '" + label + "'");
}

MnaSystem assemble(const Circuit& circuit) { return MnaSystem(circuit); }

} // namespace pasa
