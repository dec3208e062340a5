#include "pasa/transient.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <utility>

namespace pasa {

namespace {

struct LuCache {
    // few distinct step sizes per grid; linear scan with tolerant match
    std::vector<std::pair<Real, Eigen::PartialPivLU<Mat>>> entries;

    const std::pair<Real, Eigen::PartialPivLU<Mat>>* find(Real dt) const {
        for (const auto& entry : entries) {
            if (std::abs(entry.first - dt) <= 1e-9 * std::abs(dt)) return &entry;
        }
        return nullptr;
    }
};

// One implicit step; `cache` (optional) holds factorizations for
// time-invariant linear systems where the iteration matrix depends on dt
// only. On a cache hit the step is solved with the cached dt (they agree to
// 1e-9 relative — grid roundoff) so the factorization matches its equation
// bit-exactly. Linear-in-state systems are solved with a single Newton
// update, which is exact for them.
Vec newton_step(const DaeSystem& sys, const Vec& x_prev, Real t_prev, Real dt,
                const PropagatorSpec& spec, LuCache* cache) {
    const Real t_next = t_prev + dt;
    const bool trap = spec.scheme == Scheme::Trapezoidal;
    const Real w = trap ? 0.5 : 1.0;
    const bool cacheable = cache != nullptr && sys.time_invariant_linear();
    if (cacheable) {
        if (const auto* hit = cache->find(dt); hit != nullptr) dt = hit->first;
    }

    const Vec b_next = sys.source(t_next);
    Vec g_prev, b_prev;
    if (trap) {
        g_prev = sys.conduction(x_prev, t_prev);
        b_prev = sys.source(t_prev);
    }

    auto residual_at = [&](const Vec& x) {
        const Vec xdot = (x - x_prev) / dt;
        const Mat jc = sys.capacitance(xdot, t_next);
        if (trap)
            return Vec(jc * xdot + 0.5 * (sys.conduction(x, t_next) + g_prev) -
                       0.5 * (b_next + b_prev));
        return Vec(jc * xdot + sys.conduction(x, t_next) - b_next);
    };

    auto factorization = [&](const Vec& x) -> const Eigen::PartialPivLU<Mat>* {
        if (cacheable) {
            if (const auto* hit = cache->find(dt); hit != nullptr) return &hit->second;
            const Mat jc = sys.capacitance(Vec::Zero(x.size()), t_next);
            cache->entries.emplace_back(
                dt, Eigen::PartialPivLU<Mat>(jc / dt + w * sys.conduction_jacobian(x, t_next)));
            return &cache->entries.back().second;
        }
        return nullptr;
    };

    if (sys.linear_in_state()) {
        const Vec r0 = residual_at(x_prev);
        const Eigen::PartialPivLU<Mat>* lu = factorization(x_prev);
        Eigen::PartialPivLU<Mat> local;
        if (lu == nullptr) {
            const Mat jc = sys.capacitance(Vec::Zero(x_prev.size()), t_next);
            local.compute(jc / dt + w * sys.conduction_jacobian(x_prev, t_next));
            lu = &local;
        }
        const Vec delta = lu->solve(r0);
        if (!delta.allFinite())
            throw SingularMatrixError("singular iteration matrix at t = " + std::to_string(t_next));
        Vec x = x_prev - delta;
        const Real res = residual_at(x).lpNorm<Eigen::Infinity>();
        if (res > std::max(spec.newton.tol, 1e-8 * r0.lpNorm<Eigen::Infinity>()))
            throw NewtonError(res, 1);
        return x;
    }

    Vec x = x_prev;
    Real res_norm = 0.0;
    for (int iter = 0; iter < spec.newton.max_iter; ++iter) {
        const Vec r = residual_at(x);
        res_norm = r.lpNorm<Eigen::Infinity>();
        if (res_norm <= spec.newton.tol) return x;

        Eigen::PartialPivLU<Mat> local;
        const Mat jc = sys.capacitance((x - x_prev) / dt, t_next);
        local.compute(jc / dt + w * sys.conduction_jacobian(x, t_next));
        const Vec delta = local.solve(r);
        if (!delta.allFinite())
            throw SingularMatrixError("singular iteration matrix at t = " + std::to_string(t_next));
        x -= delta;
    }
    throw NewtonError(res_norm, spec.newton.max_iter);
}

} // namespace

bool Trajectory::covers(Real a, Real b) const {
    if (empty()) return false;
    const Real tol = 1e-9 * (grid.back() - grid.front());
    return grid.front() <= a + tol && b <= grid.back() + tol && a <= b + tol;
}

Vec Trajectory::sample(Real t) const {
    const Real span = grid.back() - grid.front();
    const Real tol = 1e-9 * span;
    if (t < grid.front() - tol || t > grid.back() + tol)
        throw std::out_of_range("Trajectory::sample: t outside stored window");
    t = std::clamp(t, grid.front(), grid.back());
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    if (it == grid.begin()) return states.front();
    if (it == grid.end()) return states.back();
    const auto hi = static_cast<std::size_t>(it - grid.begin());
    const std::size_t lo = hi - 1;
    const Real w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    return (1.0 - w) * states[lo] + w * states[hi];
}

Vec Trajectory::derivative(std::size_t k) const {
    if (grid.size() < 2) throw std::logic_error("Trajectory::derivative: need at least two points");
    if (k == 0) return (states[1] - states[0]) / (grid[1] - grid[0]);
    return (states[k] - states[k - 1]) / (grid[k] - grid[k - 1]);
}

std::size_t Trajectory::index_of(Real t) const {
    const Real tol = 1e-9 * (grid.back() - grid.front());
    const auto it = std::lower_bound(grid.begin(), grid.end(), t - tol);
    if (it == grid.end() || std::abs(*it - t) > tol)
        throw std::invalid_argument("Trajectory::index_of: no grid point at requested time");
    return static_cast<std::size_t>(it - grid.begin());
}

void Trajectory::write_csv(std::ostream& out) const {
    const int n = states.empty() ? 0 : static_cast<int>(states.front().size());
    out << 't';
    for (int j = 0; j < n; ++j) out << ",x" << j;
    out << '\n';
    char buf[32];
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", grid[k]);
        out << buf;
        for (int j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", states[k](j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::vector<Real> build_grid(const DaeSystem& sys, Real t0, Real t1, int steps) {
    if (!(t1 > t0)) throw std::invalid_argument("build_grid: need t1 > t0");
    if (steps < 1) throw std::invalid_argument("build_grid: need steps >= 1");
    std::vector<Real> grid;
    grid.reserve(static_cast<std::size_t>(steps) + 1);
    const Real h = (t1 - t0) / steps;
    for (int k = 0; k <= steps; ++k) grid.push_back(t0 + k * h);
    grid.back() = t1;

    const Real tol = 1e-12 * (t1 - t0);
    for (const Real e : sys.discontinuities(t0, t1)) {
        const auto it = std::lower_bound(grid.begin(), grid.end(), e);
        const bool near_next = it != grid.end() && std::abs(*it - e) <= tol;
        const bool near_prev = it != grid.begin() && std::abs(*(it - 1) - e) <= tol;
        if (!near_next && !near_prev) grid.insert(it, e);
    }
    return grid;
}

Vec step(const DaeSystem& sys, const Vec& x_prev, Real t_prev, Real dt,
         const PropagatorSpec& spec) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: need dt > 0");
    if (x_prev.size() != sys.dim()) throw std::invalid_argument("step: state dimension mismatch");
    return newton_step(sys, x_prev, t_prev, dt, spec, nullptr);
}

Trajectory integrate_on_grid(const DaeSystem& sys, const Vec& x0,
                             const std::vector<Real>& grid, const PropagatorSpec& spec) {
    if (grid.size() < 2) throw std::invalid_argument("integrate_on_grid: need at least two grid points");
    if (x0.size() != sys.dim()) throw std::invalid_argument("integrate_on_grid: state dimension mismatch");
    Trajectory traj;
    traj.kind = TrajectoryKind::Forward;
    traj.scheme = spec.scheme;
    traj.grid = grid;
    traj.states.reserve(grid.size());
    traj.states.push_back(x0);
    LuCache cache;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const Real dt = grid[k] - grid[k - 1];
        if (!(dt > 0.0)) throw std::invalid_argument("integrate_on_grid: grid not strictly increasing");
        traj.states.push_back(newton_step(sys, traj.states.back(), grid[k - 1], dt, spec, &cache));
    }
    return traj;
}

Trajectory integrate(const DaeSystem& sys, const Vec& x0, Real t0, Real t1,
                     const PropagatorSpec& spec) {
    return integrate_on_grid(sys, x0, build_grid(sys, t0, t1, spec.steps_per_interval), spec);
}

ReverseAdjointSystem::ReverseAdjointSystem(const DaeSystem& base, Trajectory forward,
                                           QoiSpec qoi, Real t_end)
    : base_(base), forward_(std::move(forward)), q_(std::move(qoi.selector)), t_end_(t_end) {
    if (q_.size() != base_.dim())
        throw std::invalid_argument("ReverseAdjointSystem: QoI selector dimension mismatch");
}

Mat ReverseAdjointSystem::capacitance(const Vec&, Real tau) const {
    // J_C of the shipped devices is independent of ẋ; evaluate with a zero
    // derivative vector at the mapped time.
    return base_.capacitance(Vec::Zero(base_.dim()), t_end_ - tau).transpose();
}

Vec ReverseAdjointSystem::conduction(const Vec& mu, Real tau) const {
    return conduction_jacobian(mu, tau) * mu;
}

Mat ReverseAdjointSystem::conduction_jacobian(const Vec&, Real tau) const {
    const Real t = t_end_ - tau;
    return base_.conduction_jacobian(forward_.sample(t), t).transpose();
}

Vec ReverseAdjointSystem::source(Real) const { return -q_; }

std::vector<Real> ReverseAdjointSystem::discontinuities(Real tau0, Real tau1) const {
    auto edges = base_.discontinuities(t_end_ - tau1, t_end_ - tau0);
    std::vector<Real> mapped;
    mapped.reserve(edges.size());
    for (auto it = edges.rbegin(); it != edges.rend(); ++it) mapped.push_back(t_end_ - *it);
    return mapped;
}

Trajectory integrate_adjoint_on_grid(const DaeSystem& sys, const Trajectory& forward,
                                     const QoiSpec& qoi, const Vec& lambda_terminal,
                                     const std::vector<Real>& t_grid,
                                     const PropagatorSpec& spec) {
    if (t_grid.size() < 2) throw std::invalid_argument("integrate_adjoint_on_grid: need two grid points");
    if (lambda_terminal.size() != sys.dim())
        throw std::invalid_argument("integrate_adjoint_on_grid: terminal value dimension mismatch");
    const Real t0 = t_grid.front(), t1 = t_grid.back();
    if (!forward.covers(t0, t1))
        throw std::invalid_argument("integrate_adjoint_on_grid: forward trajectory does not cover window");

    ReverseAdjointSystem reversed(sys, forward, qoi, t1);
    std::vector<Real> tau_grid(t_grid.size());
    for (std::size_t k = 0; k < t_grid.size(); ++k)
        tau_grid[k] = t1 - t_grid[t_grid.size() - 1 - k];
    tau_grid.front() = 0.0;

    Trajectory mu = integrate_on_grid(reversed, lambda_terminal, tau_grid, spec);

    Trajectory lambda;
    lambda.kind = TrajectoryKind::Adjoint;
    lambda.scheme = spec.scheme;
    lambda.grid = t_grid;
    lambda.states.assign(mu.states.rbegin(), mu.states.rend());
    return lambda;
}

Trajectory integrate_adjoint(const DaeSystem& sys, const Trajectory& forward,
                             const QoiSpec& qoi, const Vec& lambda_terminal,
                             Real t0, Real t1, const PropagatorSpec& spec) {
    if (!forward.covers(t0, t1))
        throw std::invalid_argument("integrate_adjoint: forward trajectory does not cover window");
    return integrate_adjoint_on_grid(sys, forward, qoi, lambda_terminal,
                                     build_grid(sys, t0, t1, spec.steps_per_interval), spec);
}

} // namespace pasa
