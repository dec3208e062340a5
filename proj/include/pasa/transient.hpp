#pragma once

#include "pasa/mna.hpp"
#include "pasa/types.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pasa {

enum class Scheme { BackwardEuler, Trapezoidal };

struct NewtonOptions {
    Real tol = 1e-10; // absolute residual inf-norm
    int max_iter = 50;
};

struct PropagatorSpec {
    Scheme scheme = Scheme::BackwardEuler;
    int steps_per_interval = 1;
    NewtonOptions newton;
};

struct NewtonError : std::runtime_error {
    NewtonError(Real residual, int iters)
        : std::runtime_error("Newton did not converge after " + std::to_string(iters) +
                             " iterations (last residual inf-norm " + std::to_string(residual) + ")"),
          residual_norm(residual), iterations(iters) {}
    Real residual_norm;
    int iterations;
};

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TrajectoryKind { Forward, Adjoint };

/// Time grid plus state (or adjoint) samples; the unit of exchange between
/// the solvers.
struct Trajectory {
    std::vector<Real> grid;
    std::vector<Vec> states;
    TrajectoryKind kind = TrajectoryKind::Forward;
    Scheme scheme = Scheme::BackwardEuler;

    [[nodiscard]] std::size_t size() const { return grid.size(); }
    [[nodiscard]] bool empty() const { return grid.empty(); }
    [[nodiscard]] Real t_begin() const { return grid.front(); }
    [[nodiscard]] Real t_end() const { return grid.back(); }
    [[nodiscard]] bool covers(Real a, Real b) const;

    /// Linear interpolation between grid points; t clamped to the grid
    /// range within a 1e-9·span tolerance.
    [[nodiscard]] Vec sample(Real t) const;

    /// State derivative by the integrator's own difference formula:
    /// backward difference, forward difference at the first point.
    [[nodiscard]] Vec derivative(std::size_t k) const;

    /// Index of the grid point equal to t (within 1e-9·span); throws when
    /// no grid point matches.
    [[nodiscard]] std::size_t index_of(Real t) const;

    /// CSV export: header `t,x0,x1,...`, 17 significant digits.
    void write_csv(std::ostream& out) const;
};

/// Uniform grid of `steps` intervals over [t0, t1] with the system's
/// coefficient discontinuities inserted so no step straddles one.
std::vector<Real> build_grid(const DaeSystem& sys, Real t0, Real t1, int steps);

/// One implicit step from (t_prev, x_prev) to t_prev + dt, resolving the
/// discretized residual with Newton's method.
Vec step(const DaeSystem& sys, const Vec& x_prev, Real t_prev, Real dt,
         const PropagatorSpec& spec);

Trajectory integrate(const DaeSystem& sys, const Vec& x0, Real t0, Real t1,
                     const PropagatorSpec& spec);

/// integrate() on a caller-supplied strictly increasing grid.
Trajectory integrate_on_grid(const DaeSystem& sys, const Vec& x0,
                             const std::vector<Real>& grid, const PropagatorSpec& spec);

/// Adjoint DAE of a system, integrated in reversed time τ = t_end − t so the
/// forward machinery applies:  J_Cᵀ μ' + (∂g/∂x)ᵀ(x(t_end−τ)) μ = −q  with
/// μ(τ) = λ(t_end − τ). Coefficients are evaluated on the stored forward
/// solution, linearly interpolated between its grid points.
class ReverseAdjointSystem : public DaeSystem {
public:
    ReverseAdjointSystem(const DaeSystem& base, Trajectory forward, QoiSpec qoi, Real t_end);

    [[nodiscard]] int dim() const override { return base_.dim(); }
    [[nodiscard]] Mat capacitance(const Vec& xdot, Real tau) const override;
    [[nodiscard]] Vec conduction(const Vec& mu, Real tau) const override;
    [[nodiscard]] Mat conduction_jacobian(const Vec& mu, Real tau) const override;
    [[nodiscard]] Vec source(Real tau) const override;
    [[nodiscard]] std::vector<Real> discontinuities(Real tau0, Real tau1) const override;
    [[nodiscard]] std::optional<Real> period() const override { return base_.period(); }
    [[nodiscard]] bool time_invariant_linear() const override { return base_.time_invariant_linear(); }
    [[nodiscard]] bool linear_in_state() const override { return true; }

    [[nodiscard]] Real terminal_time() const { return t_end_; }
    [[nodiscard]] const Trajectory& forward() const { return forward_; }

private:
    const DaeSystem& base_;
    Trajectory forward_;
    Vec q_;
    Real t_end_;
};

/// Solve J_Cᵀ λ̇ − (∂g/∂x)ᵀ λ = q backwards from t1 to t0 starting at
/// λ(t1) = lambda_terminal. The returned Trajectory is stored
/// forward-ordered in t; its final sample equals lambda_terminal exactly.
Trajectory integrate_adjoint(const DaeSystem& sys, const Trajectory& forward,
                             const QoiSpec& qoi, const Vec& lambda_terminal,
                             Real t0, Real t1, const PropagatorSpec& spec);

/// integrate_adjoint() on an explicit t-grid (typically a slice of the
/// forward grid, which makes the discrete adjoint the exact transpose of
/// the discrete forward sensitivity recursion).
Trajectory integrate_adjoint_on_grid(const DaeSystem& sys, const Trajectory& forward,
                                     const QoiSpec& qoi, const Vec& lambda_terminal,
                                     const std::vector<Real>& t_grid,
                                     const PropagatorSpec& spec);

} // namespace pasa
