#pragma once

#include "pasa/netlist.hpp"
#include "pasa/types.hpp"

#include <optional>
#include <vector>

namespace pasa {

/// Quantity-of-interest selector: u(x(t)) = qᵀ x(t).
struct QoiSpec {
    Vec selector;
};

/// Semi-explicit DAE in the form  C(ẋ,t)·ẋ + g(x,t) − b(t) = 0  with
/// g(x,t) = J_G(x,t)·x. Implementations must be pure functions of their
/// arguments so instances can be shared read-only across threads.
class DaeSystem {
public:
    virtual ~DaeSystem() = default;

    [[nodiscard]] virtual int dim() const = 0;

    /// J_C — gathers capacitance/inductance contributions.
    [[nodiscard]] virtual Mat capacitance(const Vec& xdot, Real t) const = 0;

    /// g(x,t) = J_G(x,t)·x evaluated as exact device currents.
    [[nodiscard]] virtual Vec conduction(const Vec& x, Real t) const = 0;

    /// ∂g/∂x — the Newton (tangent) linearization of the conduction term.
    [[nodiscard]] virtual Mat conduction_jacobian(const Vec& x, Real t) const = 0;

    /// Independent source vector i_s(t).
    [[nodiscard]] virtual Vec source(Real t) const = 0;

    /// Coefficient discontinuity instants strictly inside (t0, t1).
    [[nodiscard]] virtual std::vector<Real> discontinuities(Real t0, Real t1) const;

    /// Common period of the coefficients and sources, when one exists.
    [[nodiscard]] virtual std::optional<Real> period() const { return std::nullopt; }

    /// True when J_C and ∂g/∂x are constant in (x, ẋ, t); enables cached
    /// factorizations in the integrators.
    [[nodiscard]] virtual bool time_invariant_linear() const { return false; }

    /// True when g(x,t) is linear in x (coefficients may still vary in t);
    /// one Newton update then solves each implicit stage exactly.
    [[nodiscard]] virtual bool linear_in_state() const { return time_invariant_linear(); }

    /// r(x,ẋ,t) = J_C ẋ + J_G x − i_s(t); zero at any exact solution point.
    [[nodiscard]] Vec residual(const Vec& x, const Vec& xdot, Real t) const;
};

/// MNA assembly of a Circuit. Unknowns are the node voltages of nodes
/// 1..node_count followed by the branch currents of voltage sources and
/// inductors in device order.
///
/// The PWM switch conductance at time t is the value of the half-open
/// interval (previous edge, t]: on iff frac(t·f) ∈ (0, d], edges snapped
/// within 1e-9 of a period. Right-endpoint (implicit Euler) coefficient
/// evaluation therefore reads the state of the step's interior on forward
/// and time-reversed sweeps alike.
class MnaSystem : public DaeSystem {
public:
    explicit MnaSystem(Circuit circuit);

    [[nodiscard]] int dim() const override { return dim_; }
    [[nodiscard]] Mat capacitance(const Vec& xdot, Real t) const override;
    [[nodiscard]] Vec conduction(const Vec& x, Real t) const override;
    [[nodiscard]] Mat conduction_jacobian(const Vec& x, Real t) const override;
    [[nodiscard]] Vec source(Real t) const override;
    [[nodiscard]] std::vector<Real> discontinuities(Real t0, Real t1) const override;
    [[nodiscard]] std::optional<Real> period() const override;
    [[nodiscard]] bool time_invariant_linear() const override;

    /// J_G(x,t) in secant form: conductance(x,t)·x == conduction(x,t).
    [[nodiscard]] Mat conductance(const Vec& x, Real t) const;

    /// dJ_C/dp (constant single-stamp matrix; zero for resistive parameters).
    [[nodiscard]] Mat djc_dp(const ParamDescriptor& p) const;
    /// dJ_G/dp (constant for R/L/C parameters; zero for reactive ones).
    [[nodiscard]] Mat djg_dp(const ParamDescriptor& p) const;
    /// (dJ_C/dp)ẋ + (dJ_G/dp)x — exact per-stamp derivative action.
    [[nodiscard]] Vec param_stamp_action(const ParamDescriptor& p, const Vec& x,
                                         const Vec& xdot, Real t) const;

    /// Selector for the voltage of a non-ground node.
    [[nodiscard]] QoiSpec node_voltage_qoi(int node) const;

    [[nodiscard]] const Circuit& circuit() const { return circuit_; }
    [[nodiscard]] int node_count() const { return circuit_.node_count(); }
    [[nodiscard]] int branch_count() const { return dim_ - circuit_.node_count(); }
    /// Unknown index of a voltage-defined device's branch current.
    [[nodiscard]] int branch_index(const std::string& label) const;

private:
    const ParamDescriptor& resolve_param(const ParamDescriptor& p) const;

    Circuit circuit_;
    int dim_ = 0;
    std::vector<int> branch_of_device_; // -1 when the device has no branch current
    bool lti_ = true;
};

/// Assemble the MNA system for a validated circuit.
MnaSystem assemble(const Circuit& circuit);

} // namespace pasa
