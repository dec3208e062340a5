#include <catch2/catch_amalgamated.hpp>

#include "pasa/parareal.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace pasa;
using Catch::Approx;

namespace {

Circuit sine_rc(Real farads = 0.5e-6) {
    Circuit c;
    c.add_voltage_source_sine("V1", 1, 0, 0.0, 5.0, 1000.0);
    c.add_resistor("R1", 1, 2, 1000.0);
    c.add_capacitor("C1", 2, 0, farads);
    c.validate();
    return c;
}

PropagatorSpec spec_with(int steps, Scheme scheme = Scheme::BackwardEuler) {
    PropagatorSpec s;
    s.scheme = scheme;
    s.steps_per_interval = steps;
    return s;
}

// serial fine reference: chain the fine propagator across the subintervals
std::vector<Vec> serial_fine_chain(const DaeSystem& sys, const Vec& x0,
                                   const std::vector<Real>& bounds, const PropagatorSpec& fine) {
    std::vector<Vec> states{x0};
    for (std::size_t n = 0; n + 1 < bounds.size(); ++n)
        states.push_back(integrate(sys, states.back(), bounds[n], bounds[n + 1], fine).states.back());
    return states;
}

} // namespace

TEST_CASE("convergence metric formula", "[parareal]") {
    std::vector<Vec> ones{Vec::Ones(3), Vec::Ones(3)};
    CHECK(convergence_metric(ones, ones) == 0.0);

    std::vector<Vec> doubled{2.0 * Vec::Ones(3), 2.0 * Vec::Ones(3)};
    CHECK(convergence_metric(ones, doubled) == Approx(0.5));

    std::mt19937 rng(1);
    std::uniform_real_distribution<Real> dist(-2.0, 2.0);
    std::vector<Vec> a, b;
    for (int i = 0; i < 4; ++i) {
        Vec u(5), v(5);
        for (int j = 0; j < 5; ++j) {
            u(j) = dist(rng);
            v(j) = dist(rng);
        }
        a.push_back(u);
        b.push_back(v);
    }
    Real expected = 0.0;
    for (int i = 0; i < 4; ++i) {
        expected = std::max(expected, (b[i] - a[i]).lpNorm<Eigen::Infinity>() /
                                          std::max(b[i].lpNorm<Eigen::Infinity>(), 1e-12));
    }
    CHECK(convergence_metric(a, b) == Approx(expected));

    std::vector<Vec> short_list{Vec::Ones(3)};
    CHECK_THROWS_AS(convergence_metric(a, short_list), std::invalid_argument);
}

TEST_CASE("config validation", "[parareal]") {
    const MnaSystem sys = assemble(sine_rc());
    PararealConfig cfg;
    cfg.fine = spec_with(100);
    cfg.coarse = spec_with(10);

    PararealConfig bad = cfg;
    bad.n_subintervals = 1;
    CHECK_THROWS_AS(parareal_solve(sys, Vec::Zero(3), 0.0, 1e-3, bad), std::invalid_argument);
    bad = cfg;
    bad.threshold = 0.0;
    CHECK_THROWS_AS(parareal_solve(sys, Vec::Zero(3), 0.0, 1e-3, bad), std::invalid_argument);
    bad = cfg;
    bad.fine = spec_with(5); // fewer steps than coarse
    CHECK_THROWS_AS(parareal_solve(sys, Vec::Zero(3), 0.0, 1e-3, bad), std::invalid_argument);
}

TEST_CASE("identical fine and coarse propagators converge immediately", "[parareal]") {
    const MnaSystem sys = assemble(sine_rc());
    PararealConfig cfg;
    cfg.n_subintervals = 4;
    cfg.threshold = 1e-12;
    cfg.fine = spec_with(50);
    cfg.coarse = spec_with(50);
    const PararealResult res = parareal_solve(sys, Vec::Zero(3), 0.0, 2e-3, cfg);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(res.history.front() == 0.0);
}

TEST_CASE("parareal reproduces the serial fine solution after N iterations", "[parareal]") {
    const MnaSystem sys = assemble(sine_rc());
    PararealConfig cfg;
    cfg.n_subintervals = 4;
    cfg.threshold = 1e-14; // force the full N sweeps
    cfg.max_iterations = 4;
    cfg.fine = spec_with(200);
    cfg.coarse = spec_with(10);
    const PararealResult res = parareal_solve(sys, Vec::Zero(3), 0.0, 2e-3, cfg);

    const auto serial = serial_fine_chain(sys, Vec::Zero(3), res.boundaries, cfg.fine);
    REQUIRE(serial.size() == res.boundary_states.size());
    for (std::size_t n = 0; n < serial.size(); ++n) {
        const Real scale = std::max(serial[n].lpNorm<Eigen::Infinity>(), 1e-12);
        CHECK((res.boundary_states[n] - serial[n]).lpNorm<Eigen::Infinity>() / scale <= 1e-10);
    }
}

TEST_CASE("converged parareal matches serial fine within the threshold bound", "[parareal][buck]") {
    const MnaSystem sys =
        assemble(build_buck_converter(100.0, 500.0, 1e-3, 10e-3, 100e-6, 0.8, 0.5));
    PararealConfig cfg;
    cfg.n_subintervals = 2;
    cfg.threshold = 1e-6;
    cfg.max_iterations = 20;
    cfg.fine = spec_with(800);
    cfg.coarse = spec_with(40);
    const PararealResult res = parareal_solve(sys, Vec::Zero(6), 0.0, 4e-3, cfg);
    REQUIRE(res.converged);

    const auto serial = serial_fine_chain(sys, Vec::Zero(6), res.boundaries, cfg.fine);
    for (std::size_t n = 0; n < serial.size(); ++n) {
        const Real scale = std::max(serial[n].lpNorm<Eigen::Infinity>(), 1e-12);
        CHECK((res.boundary_states[n] - serial[n]).lpNorm<Eigen::Infinity>() / scale <=
              10.0 * cfg.threshold);
    }
    // fine trajectories start exactly at the final boundary states
    for (std::size_t n = 0; n < res.fine_trajectories.size(); ++n) {
        CHECK((res.fine_trajectories[n].states.front() - res.boundary_states[n])
                  .lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("subinterval boundaries snap to switching edges", "[parareal][buck]") {
    const MnaSystem sys =
        assemble(build_buck_converter(100.0, 500.0, 1e-3, 10e-3, 100e-6, 0.8, 0.45));
    PararealConfig cfg;
    cfg.n_subintervals = 2;
    cfg.threshold = 1e-3;
    cfg.max_iterations = 30;
    cfg.fine = spec_with(400);
    cfg.coarse = spec_with(20);
    const PararealResult res = pppc_solve(sys, 0.0, 2e-3, cfg);
    REQUIRE(res.boundaries.size() == 3);
    CHECK(res.boundaries[1] == Approx(0.45 * 2e-3).margin(1e-15));
}

TEST_CASE("pppc finds the zero orbit of an autonomous stable circuit", "[parareal][pppc]") {
    Circuit c;
    c.add_resistor("R1", 1, 0, 1000.0);
    c.add_capacitor("C1", 1, 0, 0.5e-6);
    const MnaSystem sys = assemble(c);
    PararealConfig cfg;
    cfg.n_subintervals = 2;
    cfg.threshold = 1e-10;
    cfg.fine = spec_with(100);
    cfg.coarse = spec_with(10);
    const PararealResult res = pppc_solve(sys, 0.0, 1e-3, cfg);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    for (const auto& x : res.boundary_states) CHECK(x.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("pppc reaches the sinusoidal steady state of the RC circuit", "[parareal][pppc]") {
    const Real period = 1e-3;
    const MnaSystem sys = assemble(sine_rc(0.5e-6));
    PararealConfig cfg;
    cfg.n_subintervals = 2;
    cfg.threshold = 1e-6;
    cfg.max_iterations = 60;
    cfg.fine = spec_with(1000);
    cfg.coarse = spec_with(25);
    const PararealResult res = pppc_solve(sys, 0.0, period, cfg);
    REQUIRE(res.converged);

    // phasor oracle for the capacitor voltage
    const Real omega = 2.0 * std::numbers::pi * 1000.0;
    const Real wrc = omega * 1000.0 * 0.5e-6;
    const Real amplitude = 5.0 / std::sqrt(1.0 + wrc * wrc);
    const Real phase = -std::atan(wrc);
    const Trajectory orbit = stitch_fine_trajectories(res);
    for (const Real t : {0.1e-3, 0.35e-3, 0.6e-3, 0.9e-3}) {
        const Real expected = amplitude * std::sin(omega * t + phase);
        CHECK(orbit.sample(t)(1) == Approx(expected).margin(0.015 * amplitude + 1e-9));
    }

    // converged orbit is periodic: fine propagation around the loop returns to X_0
    const Vec& wrap = res.boundary_states.back();
    const Vec& start = res.boundary_states.front();
    const Real scale = std::max(start.lpNorm<Eigen::Infinity>(), 1e-12);
    CHECK((wrap - start).lpNorm<Eigen::Infinity>() / scale <= cfg.threshold);
}

TEST_CASE("pppc with identical propagators has monotone history", "[parareal][pppc]") {
    const MnaSystem sys = assemble(sine_rc(0.5e-6));
    PararealConfig cfg;
    cfg.n_subintervals = 2;
    cfg.threshold = 1e-8;
    cfg.max_iterations = 80;
    cfg.fine = spec_with(200);
    cfg.coarse = spec_with(200);
    const PararealResult res = pppc_solve(sys, 0.0, 1e-3, cfg);
    REQUIRE(res.converged);
    for (std::size_t k = 1; k < res.history.size(); ++k)
        CHECK(res.history[k] <= res.history[k - 1] * (1.0 + 1e-12));
}

TEST_CASE("fine solve scheduling does not change the result", "[parareal][pppc]") {
    const MnaSystem sys = assemble(sine_rc(0.5e-6));
    PararealConfig cfg;
    cfg.n_subintervals = 4;
    cfg.threshold = 1e-6;
    cfg.max_iterations = 60;
    cfg.fine = spec_with(250);
    cfg.coarse = spec_with(25);

    PararealConfig serial_cfg = cfg;
    serial_cfg.parallel_fine = false;
    const PararealResult par = pppc_solve(sys, 0.0, 1e-3, cfg);
    const PararealResult ser = pppc_solve(sys, 0.0, 1e-3, serial_cfg);
    REQUIRE(par.boundary_states.size() == ser.boundary_states.size());
    for (std::size_t n = 0; n < par.boundary_states.size(); ++n)
        CHECK((par.boundary_states[n] - ser.boundary_states[n]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(par.iterations == ser.iterations);
}

TEST_CASE("pppc rejects non-commensurate windows", "[parareal][pppc]") {
    const MnaSystem sys = assemble(sine_rc());
    PararealConfig cfg;
    cfg.fine = spec_with(100);
    cfg.coarse = spec_with(10);
    CHECK_THROWS_AS(pppc_solve(sys, 0.0, 1.5e-3, cfg), std::invalid_argument);
}

TEST_CASE("non-convergence returns a diagnostic history", "[parareal]") {
    const MnaSystem sys = assemble(sine_rc());
    PararealConfig cfg;
    cfg.n_subintervals = 2;
    cfg.threshold = 1e-30;
    cfg.max_iterations = 3;
    cfg.fine = spec_with(100);
    cfg.coarse = spec_with(10);
    const PararealResult res = pppc_solve(sys, 0.0, 1e-3, cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 3);
    CHECK(res.history.size() == 3);
}

TEST_CASE("stitched trajectory covers the window with an increasing grid", "[parareal]") {
    const MnaSystem sys = assemble(sine_rc());
    PararealConfig cfg;
    cfg.n_subintervals = 3;
    cfg.threshold = 1e-6;
    cfg.max_iterations = 40;
    cfg.fine = spec_with(90);
    cfg.coarse = spec_with(9);
    const PararealResult res = parareal_solve(sys, Vec::Zero(3), 0.0, 3e-3, cfg);
    const Trajectory traj = stitch_fine_trajectories(res);
    CHECK(traj.grid.front() == 0.0);
    CHECK(traj.grid.back() == 3e-3);
    for (std::size_t k = 1; k < traj.size(); ++k) CHECK(traj.grid[k] > traj.grid[k - 1]);
    CHECK((traj.states.front() - res.boundary_states.front()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("history CSV export", "[parareal]") {
    std::ostringstream out;
    write_history_csv(out, {0.5, 0.125, 3e-5});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,metric");
    std::getline(in, line);
    CHECK(line == "1,0.5");
    std::getline(in, line);
    CHECK(line == "2,0.125");
}
