#pragma once

#include "pasa/mna.hpp"
#include "pasa/transient.hpp"
#include "pasa/types.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace pasa {

struct PararealConfig {
    int n_subintervals = 2;
    Real threshold = 1e-4;   // relative discontinuity bound between sweeps
    int max_iterations = 50;
    PropagatorSpec fine;
    PropagatorSpec coarse;
    bool parallel_fine = true;
};

struct PararealResult {
    std::vector<Real> boundaries;              // subinterval boundary times t_0..t_N
    std::vector<Vec> boundary_states;          // X_0..X_N
    std::vector<Trajectory> fine_trajectories; // N, propagated from the final boundary states
    int iterations = 0;
    std::vector<Real> history;                 // convergence metric per iteration
    bool converged = false;
};

/// max over boundaries of ‖X_n' − X_n‖∞ / max(‖X_n'‖∞, 1e-12).
Real convergence_metric(const std::vector<Vec>& prev, const std::vector<Vec>& curr);

/// Standard Parareal for the initial value problem on [t0, t1]:
///   X_n^{k+1} = F(X_{n−1}^k) + G(X_{n−1}^{k+1}) − G(X_{n−1}^k),  X_0 fixed,
/// swept Gauss–Seidel style so G sees already-updated predecessors. The N
/// fine propagations per iteration are mutually independent.
PararealResult parareal_solve(const DaeSystem& sys, const Vec& x0, Real t0, Real t1,
                              const PararealConfig& cfg);

/// Periodic Parareal with periodic coarse problem on [t0, t1] (an integer
/// number of system periods): the interior update above plus the wrap-around
///   X_0^{k+1} = F(X_{N−1}^k) + G(X_{N−1}^{k+1}) − G(X_{N−1}^k)
/// each sweep, converging to a (t1−t0)-periodic orbit. Within a sweep the
/// freshest X_0 is the previous wrap result, so the n = 1 coarse correction
/// cancels and X_1 reduces to F(X_0).
PararealResult pppc_solve(const DaeSystem& sys, Real t0, Real t1, const PararealConfig& cfg,
                          const std::optional<std::vector<Vec>>& initial_guess = std::nullopt);

/// Concatenate the fine trajectories of a result into a single trajectory
/// over the whole window (duplicate boundary points dropped, keeping each
/// subinterval's exact start state).
Trajectory stitch_fine_trajectories(const PararealResult& result);

/// CSV export `iteration,metric`.
void write_history_csv(std::ostream& out, const std::vector<Real>& history);

} // namespace pasa
