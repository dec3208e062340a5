#include "pasa/parareal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <ostream>
#include <stdexcept>

namespace pasa {

namespace {

void validate_config(const PararealConfig& cfg) {
    if (cfg.n_subintervals < 2) throw std::invalid_argument("parareal: need N >= 2 subintervals");
    if (!(cfg.threshold > 0.0)) throw std::invalid_argument("parareal: threshold must be positive");
    if (cfg.max_iterations < 1) throw std::invalid_argument("parareal: need max_iterations >= 1");
    if (cfg.fine.steps_per_interval < cfg.coarse.steps_per_interval)
        throw std::invalid_argument("parareal: fine propagator must have at least as many steps as coarse");
}

// Uniform boundaries, interior ones snapped to nearby coefficient
// discontinuities so propagator steps never straddle a switching edge.
std::vector<Real> make_boundaries(const DaeSystem& sys, Real t0, Real t1, int n) {
    std::vector<Real> b(static_cast<std::size_t>(n) + 1);
    const Real width = (t1 - t0) / n;
    for (int i = 0; i <= n; ++i) b[static_cast<std::size_t>(i)] = t0 + i * width;
    b.front() = t0;
    b.back() = t1;

    const auto edges = sys.discontinuities(t0, t1);
    if (!edges.empty()) {
        for (int i = 1; i < n; ++i) {
            Real& ti = b[static_cast<std::size_t>(i)];
            const auto it = std::min_element(edges.begin(), edges.end(), [&](Real u, Real v) {
                return std::abs(u - ti) < std::abs(v - ti);
            });
            if (std::abs(*it - ti) < 0.25 * width) ti = *it;
        }
        for (int i = 1; i <= n; ++i) {
            if (b[static_cast<std::size_t>(i)] <= b[static_cast<std::size_t>(i - 1)])
                throw std::invalid_argument("parareal: boundary snapping collapsed a subinterval");
        }
    }
    return b;
}

Vec coarse_end(const DaeSystem& sys, const Vec& x, Real a, Real b, const PropagatorSpec& spec) {
    return integrate(sys, x, a, b, spec).states.back();
}

// Endpoints of the N independent fine propagations for one sweep.
std::vector<Trajectory> fine_pass(const DaeSystem& sys, const std::vector<Real>& bounds,
                                  const std::vector<Vec>& starts, const PropagatorSpec& spec,
                                  bool parallel) {
    const std::size_t n = starts.size();
    std::vector<Trajectory> out(n);
    if (parallel && n > 1) {
        std::vector<std::future<Trajectory>> futures;
        futures.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            futures.push_back(std::async(std::launch::async, [&, i] {
                return integrate(sys, starts[i], bounds[i], bounds[i + 1], spec);
            }));
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = integrate(sys, starts[i], bounds[i], bounds[i + 1], spec);
    }
    return out;
}

void check_periodic_window(const DaeSystem& sys, Real t0, Real t1) {
    if (const auto period = sys.period()) {
        const Real cycles = (t1 - t0) / *period;
        if (std::abs(cycles - std::round(cycles)) > 1e-9 * std::max(1.0, cycles))
            throw std::invalid_argument(
                "pppc_solve: window must span an integer number of source periods");
    }
}

} // namespace

Real convergence_metric(const std::vector<Vec>& prev, const std::vector<Vec>& curr) {
    if (prev.size() != curr.size()) throw std::invalid_argument("convergence_metric: shape mismatch");
    Real metric = 0.0;
    for (std::size_t i = 0; i < curr.size(); ++i) {
        if (prev[i].size() != curr[i].size())
            throw std::invalid_argument("convergence_metric: state dimension mismatch");
        const Real change = (curr[i] - prev[i]).lpNorm<Eigen::Infinity>();
        const Real scale = std::max(curr[i].lpNorm<Eigen::Infinity>(), 1e-12);
        metric = std::max(metric, change / scale);
    }
    return metric;
}

PararealResult parareal_solve(const DaeSystem& sys, const Vec& x0, Real t0, Real t1,
                              const PararealConfig& cfg) {
    validate_config(cfg);
    if (!(t1 > t0)) throw std::invalid_argument("parareal_solve: need t1 > t0");
    if (x0.size() != sys.dim()) throw std::invalid_argument("parareal_solve: state dimension mismatch");

    const int n = cfg.n_subintervals;
    const auto bounds = make_boundaries(sys, t0, t1, n);

    PararealResult res;
    res.boundaries = bounds;

    // bootstrap: one serial coarse sweep from x0
    std::vector<Vec> x(static_cast<std::size_t>(n) + 1);
    std::vector<Vec> g_prev(static_cast<std::size_t>(n) + 1);
    x[0] = x0;
    for (int k = 1; k <= n; ++k) {
        g_prev[k] = coarse_end(sys, x[k - 1], bounds[k - 1], bounds[k], cfg.coarse);
        x[k] = g_prev[k];
    }

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        const std::vector<Vec> x_old = x;
        const std::vector<Vec> starts(x_old.begin(), x_old.end() - 1);
        const auto fine = fine_pass(sys, bounds, starts, cfg.fine, cfg.parallel_fine);

        for (int k = 1; k <= n; ++k) {
            Vec g_new = coarse_end(sys, x[k - 1], bounds[k - 1], bounds[k], cfg.coarse);
            x[k] = fine[static_cast<std::size_t>(k - 1)].states.back() + g_new - g_prev[k];
            g_prev[k] = std::move(g_new);
        }

        res.iterations = iter;
        const Real metric = convergence_metric(x_old, x);
        res.history.push_back(metric);
        if (metric <= cfg.threshold) {
            res.converged = true;
            break;
        }
    }

    const std::vector<Vec> starts(x.begin(), x.end() - 1);
    res.fine_trajectories = fine_pass(sys, bounds, starts, cfg.fine, cfg.parallel_fine);
    res.boundary_states = std::move(x);
    return res;
}

PararealResult pppc_solve(const DaeSystem& sys, Real t0, Real t1, const PararealConfig& cfg,
                          const std::optional<std::vector<Vec>>& initial_guess) {
    validate_config(cfg);
    if (!(t1 > t0)) throw std::invalid_argument("pppc_solve: need t1 > t0");
    check_periodic_window(sys, t0, t1);

    const int n = cfg.n_subintervals;
    const auto bounds = make_boundaries(sys, t0, t1, n);

    // X_0..X_{N-1}; the wrap identifies X_N with X_0
    std::vector<Vec> x(static_cast<std::size_t>(n));
    if (initial_guess) {
        if (static_cast<int>(initial_guess->size()) != n)
            throw std::invalid_argument("pppc_solve: initial guess must supply N boundary states");
        for (const auto& v : *initial_guess) {
            if (v.size() != sys.dim())
                throw std::invalid_argument("pppc_solve: initial guess dimension mismatch");
        }
        x = *initial_guess;
    } else {
        x[0] = Vec::Zero(sys.dim());
        for (int k = 1; k < n; ++k)
            x[static_cast<std::size_t>(k)] =
                coarse_end(sys, x[static_cast<std::size_t>(k - 1)], bounds[k - 1], bounds[k], cfg.coarse);
    }

    // g_prev[k]: coarse endpoint for subinterval k at the predecessor state
    // used in its last update; slot 1 is unused (its correction cancels).
    std::vector<Vec> g_prev(static_cast<std::size_t>(n) + 1);
    for (int k = 2; k <= n; ++k)
        g_prev[static_cast<std::size_t>(k)] =
            coarse_end(sys, x[static_cast<std::size_t>(k - 1)], bounds[k - 1], bounds[k], cfg.coarse);

    PararealResult res;
    res.boundaries = bounds;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        const std::vector<Vec> x_old = x;
        const auto fine = fine_pass(sys, bounds, x_old, cfg.fine, cfg.parallel_fine);

        x[1] = fine[0].states.back(); // n = 1: coarse correction cancels
        for (int k = 2; k < n; ++k) {
            Vec g_new = coarse_end(sys, x[static_cast<std::size_t>(k - 1)], bounds[k - 1], bounds[k],
                                   cfg.coarse);
            x[static_cast<std::size_t>(k)] = fine[static_cast<std::size_t>(k - 1)].states.back() +
                                             g_new - g_prev[static_cast<std::size_t>(k)];
            g_prev[static_cast<std::size_t>(k)] = std::move(g_new);
        }
        {
            Vec g_new = coarse_end(sys, x[static_cast<std::size_t>(n - 1)], bounds[n - 1], bounds[n],
                                   cfg.coarse);
            x[0] = fine[static_cast<std::size_t>(n - 1)].states.back() + g_new -
                   g_prev[static_cast<std::size_t>(n)];
            g_prev[static_cast<std::size_t>(n)] = std::move(g_new);
        }

        res.iterations = iter;
        const Real metric = convergence_metric(x_old, x);
        res.history.push_back(metric);
        if (metric <= cfg.threshold) {
            res.converged = true;
            break;
        }
    }

    res.fine_trajectories = fine_pass(sys, bounds, x, cfg.fine, cfg.parallel_fine);
    res.boundary_states = std::move(x);
    res.boundary_states.push_back(res.fine_trajectories.back().states.back());
    return res;
}

Trajectory stitch_fine_trajectories(const PararealResult& result) {
    Trajectory out;
    if (result.fine_trajectories.empty()) return out;
    out.kind = result.fine_trajectories.front().kind;
    out.scheme = result.fine_trajectories.front().scheme;
    for (std::size_t i = 0; i < result.fine_trajectories.size(); ++i) {
        const auto& piece = result.fine_trajectories[i];
        // keep each subinterval's exact start state, drop the previous
        // piece's endpoint (they agree to the convergence threshold)
        if (i > 0) {
            out.grid.pop_back();
            out.states.pop_back();
        }
        out.grid.insert(out.grid.end(), piece.grid.begin(), piece.grid.end());
        out.states.insert(out.states.end(), piece.states.begin(), piece.states.end());
    }
    return out;
}

void write_history_csv(std::ostream& out, const std::vector<Real>& history) {
    out << "iteration,metric\n";
    char buf[32];
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", history[i]);
        out << (i + 1) << ',' << buf << '\n';
    }
}

} // namespace pasa
