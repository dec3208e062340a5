#include "pasa/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>

namespace pasa {

namespace {

// Trapezoidal quadrature of index-wise values over [a, b], with linear
// interpolation at window ends that fall between grid points.
Real trapezoid_window(const std::vector<Real>& grid, const std::function<Real(std::size_t)>& f,
                      Real a, Real b) {
    const Real span = grid.back() - grid.front();
    const Real tol = 1e-9 * span;
    if (a < grid.front() - tol || b > grid.back() + tol || a > b + tol)
        throw std::invalid_argument("quadrature window not covered by trajectory");
    a = std::clamp(a, grid.front(), grid.back());
    b = std::clamp(b, grid.front(), grid.back());
    if (a >= b) return 0.0;

    auto value_at = [&](Real t, std::size_t hint_lo) {
        const std::size_t hi = hint_lo + 1;
        const Real w = (t - grid[hint_lo]) / (grid[hi] - grid[hint_lo]);
        return (1.0 - w) * f(hint_lo) + w * f(hi);
    };

    // first grid index > a and last grid index <= b (within tolerance)
    const auto ia = static_cast<std::size_t>(
        std::upper_bound(grid.begin(), grid.end(), a + tol) - grid.begin());
    const auto ib = static_cast<std::size_t>(
        std::upper_bound(grid.begin(), grid.end(), b + tol) - grid.begin()) - 1;

    if (ib + 1 <= ia) { // a and b inside one grid interval
        return 0.5 * (value_at(a, ia - 1) + value_at(b, ia - 1)) * (b - a);
    }
    Real sum = 0.0;
    if (grid[ia] - a > tol) sum += 0.5 * (value_at(a, ia - 1) + f(ia)) * (grid[ia] - a);
    for (std::size_t k = ia; k < ib; ++k)
        sum += 0.5 * (f(k) + f(k + 1)) * (grid[k + 1] - grid[k]);
    if (b - grid[ib] > tol) sum += 0.5 * (f(ib) + value_at(b, ib)) * (b - grid[ib]);
    return sum;
}

struct ParamStamps {
    Mat djc;
    Mat djg;
};

std::vector<ParamStamps> collect_stamps(const MnaSystem& sys,
                                        const std::vector<ParamDescriptor>& params) {
    std::vector<ParamStamps> stamps;
    stamps.reserve(params.size());
    for (const auto& p : params) stamps.push_back({sys.djc_dp(p), sys.djg_dp(p)});
    return stamps;
}

// (dJ_C/dp)ẋ_k + (dJ_G/dp)x_k on a trajectory grid point.
Vec stamp_action_at(const ParamStamps& s, const Trajectory& traj, std::size_t k) {
    return s.djc * traj.derivative(k) + s.djg * traj.states[k];
}

Real periodicity_defect(const Vec& first, const Vec& last) {
    const Real scale = std::max(last.lpNorm<Eigen::Infinity>(), 1e-12);
    return (last - first).lpNorm<Eigen::Infinity>() / scale;
}

// One-period integral of λᵀ[(dJ_C/dp)ẋ + (dJ_G/dp)x] without periodicity
// checks; the first point's ẋ uses the periodic wrap.
Real periodic_integral(const PeriodicSolution& sol, const ParamStamps& stamps) {
    const auto& fwd = sol.forward;
    const auto& adj = sol.adjoint;
    const std::size_t last = fwd.size() - 1;
    const Vec wrap_deriv = fwd.derivative(last);
    auto integrand = [&](std::size_t k) {
        const Vec c = k == 0 ? Vec(stamps.djc * wrap_deriv + stamps.djg * fwd.states[0])
                             : stamp_action_at(stamps, fwd, k);
        return adj.states[k].dot(c);
    };
    return trapezoid_window(fwd.grid, integrand, fwd.grid.front(), fwd.grid.back());
}

} // namespace

void SensitivityReport::write_csv(std::ostream& out) const {
    out << "parameter,method,value_raw,value_per_period,ref_method,rel_error\n";
    char buf[32];
    auto num = [&](Real v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& e : entries) {
        out << e.parameter << ',' << e.method << ',' << num(e.value_raw) << ','
            << num(e.value_per_period) << ',' << e.ref_method << ','
            << (e.rel_error ? num(*e.rel_error) : std::string()) << '\n';
    }
}

std::vector<Trajectory> dsa(const MnaSystem& sys, const Trajectory& forward,
                            const std::vector<ParamDescriptor>& params) {
    if (forward.size() < 2) throw std::invalid_argument("dsa: forward trajectory too short");
    if (forward.states.front().lpNorm<Eigen::Infinity>() != 0.0)
        throw std::invalid_argument("dsa: forward run must start from the zero state");

    const auto stamps = collect_stamps(sys, params);
    const int n = sys.dim();
    const bool trap = forward.scheme == Scheme::Trapezoidal;

    std::vector<Trajectory> out(params.size());
    for (auto& traj : out) {
        traj.kind = TrajectoryKind::Forward;
        traj.scheme = forward.scheme;
        traj.grid = forward.grid;
        traj.states.assign(forward.size(), Vec::Zero(n));
    }

    const bool lti = sys.time_invariant_linear();
    Eigen::PartialPivLU<Mat> lu;
    Real cached_dt = -1.0;
    Mat a_prev;
    if (trap) a_prev = sys.conduction_jacobian(forward.states[0], forward.grid[0]);

    for (std::size_t k = 1; k < forward.size(); ++k) {
        const Real dt = forward.grid[k] - forward.grid[k - 1];
        const Real t = forward.grid[k];
        const Vec& x = forward.states[k];
        const Vec deriv = forward.derivative(k);
        const Mat jc = sys.capacitance(deriv, t);
        const Mat a_k = sys.conduction_jacobian(x, t);

        if (!lti || std::abs(dt - cached_dt) > 1e-9 * dt) {
            lu.compute(jc / dt + (trap ? 0.5 : 1.0) * a_k);
            cached_dt = dt;
        }

        for (std::size_t i = 0; i < params.size(); ++i) {
            const Vec& s_prev = out[i].states[k - 1];
            Vec rhs;
            if (trap) {
                rhs = jc / dt * s_prev - 0.5 * (a_prev * s_prev) - stamps[i].djc * deriv -
                      0.5 * stamps[i].djg * (x + forward.states[k - 1]);
            } else {
                rhs = jc / dt * s_prev - stamps[i].djc * deriv - stamps[i].djg * x;
            }
            out[i].states[k] = lu.solve(rhs);
        }
        if (trap) a_prev = a_k;
    }
    return out;
}

Real integrate_qoi(const Trajectory& forward, const QoiSpec& qoi, Real a, Real b) {
    if (forward.empty()) throw std::invalid_argument("integrate_qoi: empty trajectory");
    if (qoi.selector.size() != forward.states.front().size())
        throw std::invalid_argument("integrate_qoi: selector dimension mismatch");
    return trapezoid_window(
        forward.grid, [&](std::size_t k) { return qoi.selector.dot(forward.states[k]); }, a, b);
}

std::vector<Real> asa_transient(const MnaSystem& sys, const Trajectory& forward,
                                const QoiSpec& qoi, const std::vector<ParamDescriptor>& params,
                                Real t0, Real t_end) {
    if (!forward.covers(t0, t_end))
        throw std::invalid_argument("asa_transient: window not covered by forward trajectory");
    const std::size_t i0 = forward.index_of(t0);
    const std::size_t i1 = forward.index_of(t_end);
    if (i1 <= i0) throw std::invalid_argument("asa_transient: empty window");

    const std::vector<Real> window_grid(forward.grid.begin() + static_cast<std::ptrdiff_t>(i0),
                                        forward.grid.begin() + static_cast<std::ptrdiff_t>(i1) + 1);
    PropagatorSpec adj_spec;
    adj_spec.scheme = forward.scheme;
    const Trajectory lambda = integrate_adjoint_on_grid(sys, forward, qoi, Vec::Zero(sys.dim()),
                                                        window_grid, adj_spec);

    const auto stamps = collect_stamps(sys, params);
    std::vector<Real> values(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto integrand = [&](std::size_t k) {
            // the trajectory's own first point has no backward difference;
            // a zero-start run was at rest, so its derivative is zero there.
            // Interior window starts keep the backward difference across the
            // window edge.
            if (i0 + k == 0) return lambda.states[k].dot(stamps[i].djg * forward.states[0]);
            const Vec c = stamp_action_at(stamps[i], forward, i0 + k);
            return lambda.states[k].dot(c);
        };
        values[i] = trapezoid_window(lambda.grid, integrand, t0, t_end);
    }
    return values;
}

std::vector<Real> asa_periodic_literature(const MnaSystem& sys, const Trajectory& forward,
                                          const QoiSpec& qoi,
                                          const std::vector<ParamDescriptor>& params, Real period) {
    if (!(period > 0.0)) throw std::invalid_argument("asa_periodic_literature: period must be positive");
    const Real t_begin = forward.t_begin();
    const Real t_end = forward.t_end();
    if (t_end - t_begin < 2.0 * period)
        throw std::invalid_argument("asa_periodic_literature: transient window shorter than 2 periods");

    const auto full = asa_transient(sys, forward, qoi, params, t_begin, t_end);
    const auto to_prev = asa_transient(sys, forward, qoi, params, t_begin, t_end - period);
    std::vector<Real> values(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) values[i] = full[i] - to_prev[i];
    return values;
}

std::vector<Real> asa_periodic(const PeriodicSolution& sol, const MnaSystem& sys,
                               const std::vector<ParamDescriptor>& params) {
    const Real defect = std::max(sol.forward_defect, sol.adjoint_defect);
    if (defect > 10.0 * sol.threshold) {
        std::ostringstream msg;
        msg << "asa_periodic: periodicity defect " << defect << " exceeds 10x threshold "
            << sol.threshold << "; the dropped boundary term would pollute the result";
        throw PeriodicityError(msg.str());
    }
    const auto stamps = collect_stamps(sys, params);
    std::vector<Real> values(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) values[i] = periodic_integral(sol, stamps[i]);
    return values;
}

Real boundary_term_residual(const PeriodicSolution& sol, const MnaSystem& sys,
                            const ParamDescriptor& p, const Vec& dxdp_at_tm,
                            const Vec& dxdp_at_tm_minus_period) {
    if (dxdp_at_tm.size() != sys.dim() || dxdp_at_tm_minus_period.size() != sys.dim())
        throw std::invalid_argument("boundary_term_residual: sensitivity state dimension mismatch");
    const auto& fwd = sol.forward;
    const std::size_t last = fwd.size() - 1;

    const Vec deriv_end = fwd.derivative(last);
    const Vec deriv_begin = deriv_end; // periodic wrap for the window start
    const Real term_end =
        sol.adjoint.states[last].dot(sys.capacitance(deriv_end, fwd.grid[last]) * dxdp_at_tm);
    const Real term_begin = sol.adjoint.states[0].dot(
        sys.capacitance(deriv_begin, fwd.grid[0]) * dxdp_at_tm_minus_period);

    const ParamStamps stamps{sys.djc_dp(p), sys.djg_dp(p)};
    const Real integral = periodic_integral(sol, stamps);
    return std::abs(term_end - term_begin) / std::max(std::abs(integral), 1e-300);
}

PeriodicSolution solve_periodic(const MnaSystem& sys, const QoiSpec& qoi, Real t_m, Real period,
                                const PararealConfig& cfg, PeriodicRunInfo* info) {
    if (!(period > 0.0)) throw std::invalid_argument("solve_periodic: period must be positive");
    const Real t_a = t_m - period;

    const PararealResult fwd_res = pppc_solve(sys, t_a, t_m, cfg);
    Trajectory forward = stitch_fine_trajectories(fwd_res);
    const Real fwd_defect =
        periodicity_defect(fwd_res.boundary_states.front(), fwd_res.boundary_states.back());

    ReverseAdjointSystem reversed(sys, forward, qoi, t_m);
    const PararealResult adj_res = pppc_solve(reversed, 0.0, period, cfg);
    const Trajectory mu = stitch_fine_trajectories(adj_res);
    const Real adj_defect =
        periodicity_defect(adj_res.boundary_states.front(), adj_res.boundary_states.back());

    // store λ(t) = μ(t_m − t) on the forward grid
    Trajectory adjoint;
    adjoint.kind = TrajectoryKind::Adjoint;
    adjoint.scheme = cfg.fine.scheme;
    adjoint.grid = forward.grid;
    adjoint.states.reserve(forward.size());
    for (const Real t : forward.grid) adjoint.states.push_back(mu.sample(t_m - t));

    if (info != nullptr) {
        info->forward_history = fwd_res.history;
        info->adjoint_history = adj_res.history;
        info->forward_iterations = fwd_res.iterations;
        info->adjoint_iterations = adj_res.iterations;
        info->converged = fwd_res.converged && adj_res.converged;
    }

    PeriodicSolution sol;
    sol.forward = std::move(forward);
    sol.adjoint = std::move(adjoint);
    sol.t_m = t_m;
    sol.period = period;
    sol.threshold = cfg.threshold;
    sol.forward_defect = fwd_defect;
    sol.adjoint_defect = adj_defect;
    return sol;
}

Real fd_oracle(const Circuit& circuit, const ParamDescriptor& p, Real h_rel, const QoiSpec& qoi,
               Real window_a, Real window_b, const FdRunSpec& run) {
    if (!(h_rel >= 1e-8 && h_rel <= 1e-2))
        throw std::invalid_argument("fd_oracle: h_rel must lie in [1e-8, 1e-2]");
    const Real nominal = circuit.param(p.name).nominal;
    const Real h = h_rel * std::abs(nominal);

    auto evaluate = [&](Real value) {
        const Circuit perturbed = circuit.with_param_value(p.name, value);
        const MnaSystem sys = assemble(perturbed);
        Trajectory traj;
        if (run.mode == FdMode::Transient) {
            traj = integrate(sys, Vec::Zero(sys.dim()), run.t0, run.t1, run.propagator);
        } else {
            traj = stitch_fine_trajectories(pppc_solve(sys, window_a, window_b, run.pppc));
        }
        return integrate_qoi(traj, qoi, window_a, window_b);
    };

    const Real u_plus = evaluate(nominal + h);
    const Real u_minus = evaluate(nominal - h);
    return (u_plus - u_minus) / (2.0 * h);
}

} // namespace pasa
