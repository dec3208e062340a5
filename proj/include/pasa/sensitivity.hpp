#pragma once

#include "pasa/mna.hpp"
#include "pasa/parareal.hpp"
#include "pasa/transient.hpp"
#include "pasa/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pasa {

struct SensitivityEntry {
    std::string parameter;
    std::string method;
    Real value_raw = 0.0;        // integrated dU/dp over the method's window [QoI·s / unit]
    Real value_per_period = 0.0; // raw normalized by window length in periods
    Real nominal = 0.0;          // parameter nominal, for cross-unit scale comparisons
    std::string ref_method;
    std::optional<Real> rel_error;
};

struct SensitivityReport {
    std::vector<SensitivityEntry> entries;
    Real window_begin = 0.0; // steady-state comparison window
    Real window_end = 0.0;
    Real period = 0.0;

    /// CSV `parameter,method,value_raw,value_per_period,ref_method,rel_error`.
    void write_csv(std::ostream& out) const;
};

/// Forward and adjoint solutions over one period, periodic to the PP-PC
/// threshold; the adjoint is stored on the forward grid.
struct PeriodicSolution {
    Trajectory forward;
    Trajectory adjoint;
    Real t_m = 0.0;    // right endpoint of the period window
    Real period = 0.0; // T_p
    Real threshold = 0.0;
    Real forward_defect = 0.0; // ‖x(t_m) − x(t_m−T_p)‖∞ / ‖x(t_m)‖∞
    Real adjoint_defect = 0.0;
};

/// Thrown when a periodic quantity is requested from a solution whose
/// periodicity defect exceeds 10× its threshold.
struct PeriodicityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Forward sensitivity propagation: per-parameter dx/dp on the forward grid
/// with the forward scheme, dx/dp(t_0) = 0. Requires a zero initial state.
std::vector<Trajectory> dsa(const MnaSystem& sys, const Trajectory& forward,
                            const std::vector<ParamDescriptor>& params);

/// Trapezoidal ∫ qᵀx dt over [a, b] on the trajectory grid.
Real integrate_qoi(const Trajectory& forward, const QoiSpec& qoi, Real a, Real b);

/// Transient adjoint sensitivity: solves the adjoint backwards from t_end
/// with λ(t_end) = 0 on the forward grid, then integrates
/// λᵀ[(dJ_C/dp)ẋ + (dJ_G/dp)x] over [t0, t_end] per parameter. Equals the
/// windowed QoI sensitivity when t0 is the (zero-state) start of the run.
std::vector<Real> asa_transient(const MnaSystem& sys, const Trajectory& forward,
                                const QoiSpec& qoi, const std::vector<ParamDescriptor>& params,
                                Real t0, Real t_end);

/// Periodic sensitivity by the two-transient construction: the difference of
/// full-range transient adjoint sensitivities with terminal times t_end and
/// t_end − period, giving dU/dp over the final period of the stored run.
std::vector<Real> asa_periodic_literature(const MnaSystem& sys, const Trajectory& forward,
                                          const QoiSpec& qoi,
                                          const std::vector<ParamDescriptor>& params, Real period);

/// One-period sensitivity from a periodic forward/adjoint pair; the
/// boundary term of the windowed integration by parts vanishes by
/// periodicity. Refuses solutions whose defect exceeds 10× threshold.
std::vector<Real> asa_periodic(const PeriodicSolution& sol, const MnaSystem& sys,
                               const std::vector<ParamDescriptor>& params);

/// Magnitude of the dropped boundary term
/// |λᵀJ_C (dx/dp)|_{t_m} − λᵀJ_C (dx/dp)|_{t_m−T_p}| normalized by the
/// one-period integral; quantifies how periodic the pair really is.
Real boundary_term_residual(const PeriodicSolution& sol, const MnaSystem& sys,
                            const ParamDescriptor& p, const Vec& dxdp_at_tm,
                            const Vec& dxdp_at_tm_minus_period);

struct PeriodicRunInfo {
    std::vector<Real> forward_history;
    std::vector<Real> adjoint_history;
    int forward_iterations = 0;
    int adjoint_iterations = 0;
    bool converged = false;
};

/// Periodic steady state of forward and adjoint over [t_m − period, t_m]:
/// forward orbit by PP-PC on the circuit, adjoint orbit by PP-PC on the
/// time-reversed adjoint system with periodic boundary instead of a zero
/// terminal value.
PeriodicSolution solve_periodic(const MnaSystem& sys, const QoiSpec& qoi, Real t_m, Real period,
                                const PararealConfig& cfg, PeriodicRunInfo* info = nullptr);

enum class FdMode { Transient, Periodic };

struct FdRunSpec {
    FdMode mode = FdMode::Transient;
    Real t0 = 0.0; // transient start
    Real t1 = 0.0; // transient horizon end
    PropagatorSpec propagator;
    PararealConfig pppc; // periodic mode
};

/// Central-difference oracle: (U(p+h) − U(p−h)) / 2h with h = h_rel·nominal,
/// each U from an independent full solve on identical grids.
Real fd_oracle(const Circuit& circuit, const ParamDescriptor& p, Real h_rel, const QoiSpec& qoi,
               Real window_a, Real window_b, const FdRunSpec& run);

} // namespace pasa
