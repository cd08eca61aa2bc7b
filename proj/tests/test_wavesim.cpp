#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "decaylab/wavesim.hpp"

using namespace decaylab;

namespace {

constexpr double pi = std::numbers::pi;

WaveState sine_state(const Grid& grid, int n, double amp, double vamp = 0.0)
{
    WaveState s;
    s.w.resize(grid.N());
    s.v.resize(grid.N());
    for (int j = 0; j < grid.N(); ++j) {
        s.w[j] = amp * std::sin(n * pi * grid.x(j));
        s.v[j] = vamp * std::sin(n * pi * grid.x(j));
    }
    return s;
}

WaveState mixed_state(const Grid& grid)
{
    WaveState s;
    s.w.resize(grid.N());
    s.v.resize(grid.N());
    for (int j = 0; j < grid.N(); ++j) {
        const double x = grid.x(j);
        s.w[j] = 0.6 * std::sin(pi * x) + 0.2 * std::sin(3 * pi * x);
        s.v[j] = 1.5 * std::sin(2 * pi * x) - 0.4 * std::sin(5 * pi * x);
    }
    return s;
}

} // namespace

TEST_CASE("grid transforms and eigenvalues")
{
    const Grid grid(63);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(63);
    c[0] = 0.3;
    c[6] = -1.2;
    c[62] = 0.01;
    CHECK((grid.to_modes(grid.from_modes(c)) - c).norm() < 1e-13);
    // Discrete Laplacian eigenvectors are the sampled sines.
    Eigen::VectorXd e = Eigen::VectorXd::Zero(63);
    e[4] = 1.0;
    const Eigen::VectorXd u = grid.from_modes(e);
    CHECK((grid.apply_K(u) - grid.lambda_discrete(5) * u).norm() < 1e-9 * u.norm() * grid.lambda_discrete(5));
    CHECK(grid.stiffness(u, u) == doctest::Approx(grid.h() * u.dot(grid.apply_K(u))).epsilon(1e-12));
    CHECK(grid.lambda_discrete(1) == doctest::Approx(pi * pi).epsilon(1e-3));
}

TEST_CASE("energy and norms of single modes")
{
    const Grid grid(255);
    auto s = sine_state(grid, 1, 1.0);
    CHECK(energy(grid, s) == doctest::Approx(pi * pi / 4).epsilon(1e-12));
    s = sine_state(grid, 3, 1.0);
    // sin = e_n / sqrt(2): ||.||_{H_1} = lambda / sqrt(2).
    CHECK(strong_norm(grid, s) == doctest::Approx(9 * pi * pi / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(weak_norm(grid, s, 0.5) == doctest::Approx(std::sqrt(2 * energy(grid, s))).epsilon(1e-12));
    WaveState z{0.0, Eigen::VectorXd::Zero(255), Eigen::VectorXd::Zero(255)};
    CHECK(energy(grid, z) == 0.0);
}

TEST_CASE("conservative spectral run matches separation of variables and conserves energy")
{
    WaveConfig cfg;
    cfg.N = 64;
    cfg.kind = WaveKind::conservative;
    cfg.scheme = WaveScheme::spectral;
    cfg.dt = 0.01;
    cfg.T_final = 100.0;
    cfg.stride = 100;
    const Grid grid(cfg.N);
    auto run = solve(cfg, sine_state(grid, 1, 1.0));
    for (const auto& f : run.frames) {
        const auto ref = sine_state(grid, 1, std::cos(pi * f.t));
        CHECK((f.w - ref.w).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    auto mixed = solve(cfg, mixed_state(grid));
    const double E0 = mixed.trace.energy.front();
    for (double E : mixed.trace.energy) CHECK(std::abs(E - E0) <= 1e-12 * E0);
    CHECK(energy_identity_residual(mixed.trace) <= 1e-12);
}

TEST_CASE("spectral propagator refuses damping")
{
    WaveConfig cfg;
    cfg.scheme = WaveScheme::spectral;
    cfg.kind = WaveKind::linear_damped;
    cfg.field = CoefficientField::constant(1.0);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.field = CoefficientField::zero();
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("CFL violation is a config error")
{
    WaveConfig cfg;
    cfg.N = 99;
    cfg.dt = 0.011;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.dt = 0.01;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("zero coefficient reduces damped kinds to the conservative flow")
{
    WaveConfig cfg;
    cfg.N = 64;
    cfg.T_final = 1.0;
    cfg.stride = 8;
    const Grid grid(cfg.N);
    const auto init = mixed_state(grid);
    cfg.kind = WaveKind::conservative;
    const auto ref = solve(cfg, init);
    for (auto kind : {WaveKind::linear_damped, WaveKind::nonlinear_damped}) {
        cfg.kind = kind;
        cfg.law = make_power_law(3.0);
        const auto run = solve(cfg, init);
        REQUIRE(run.frames.size() == ref.frames.size());
        for (std::size_t i = 0; i < ref.frames.size(); ++i) CHECK((run.frames[i].w - ref.frames[i].w).norm() == 0.0);
    }
    // The spectral run with a = 0 is the same flow up to the leapfrog error.
    cfg.kind = WaveKind::nonlinear_damped;
    cfg.scheme = WaveScheme::spectral;
    const auto spec = solve(cfg, init);
    CHECK((spec.frames.back().w - ref.frames.back().w).lpNorm<Eigen::Infinity>() < 5e-3);
}

TEST_CASE("linear law reproduces the linear damped solver")
{
    WaveConfig cfg;
    cfg.N = 128;
    cfg.T_final = 2.0;
    cfg.stride = 16;
    cfg.field = CoefficientField::bump(0.2, 0.5, 1.0, 2.0);
    const Grid grid(cfg.N);
    const auto init = mixed_state(grid);
    cfg.kind = WaveKind::linear_damped;
    const auto lin = solve(cfg, init);
    cfg.kind = WaveKind::nonlinear_damped;
    cfg.law = make_linear_law();
    const auto nl = solve(cfg, init);
    for (std::size_t i = 0; i < lin.frames.size(); ++i) {
        CHECK((lin.frames[i].w - nl.frames[i].w).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("damped runs are dissipative and satisfy the energy identity at second order")
{
    WaveConfig cfg;
    cfg.N = 1024;
    cfg.T_final = 2.0;
    cfg.kind = WaveKind::nonlinear_damped;
    cfg.law = make_power_law(3.0);
    cfg.field = CoefficientField::bump(0.3, 0.6, 1.0, 1.0);
    cfg.keep_frames = false;
    cfg.stride = 4;
    const Grid grid(cfg.N);
    const auto init = mixed_state(grid);
    double prev = 0.0;
    for (double factor : {0.5, 0.25}) {
        cfg.dt = factor * grid.h();
        const auto run = solve(cfg, init);
        const auto& tr = run.trace;
        const double E0 = tr.staggered_energy.front();
        for (std::size_t i = 1; i < tr.size(); ++i) {
            CHECK(tr.staggered_energy[i] <= tr.staggered_energy[i - 1] + 1e-12 * E0);
            CHECK(tr.dissipation[i] >= tr.dissipation[i - 1]);
        }
        CHECK(tr.energy.back() < 0.9 * tr.energy.front());
        const double res = energy_identity_residual(tr);
        CHECK(res <= 1e-3);
        if (prev > 0.0) {
            CHECK(prev / res >= 3.0);
            CHECK(prev / res <= 5.0);
        }
        prev = res;
    }
}

TEST_CASE("leapfrog converges at second order in dt")
{
    WaveConfig cfg;
    cfg.N = 200;
    cfg.T_final = 1.0;
    cfg.kind = WaveKind::linear_damped;
    cfg.field = CoefficientField::constant(1.0);
    cfg.keep_frames = true;
    const Grid grid(cfg.N);
    const auto init = sine_state(grid, 1, 1.0);
    auto final_w = [&](double dt) {
        cfg.dt = dt;
        cfg.stride = 1 << 20;
        return solve(cfg, init).frames.back().w;
    };
    const double h = grid.h();
    const Eigen::VectorXd ref = final_w(h / 64);
    const double e1 = (final_w(h / 2) - ref).norm();
    const double e2 = (final_w(h / 4) - ref).norm();
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("csv and binary snapshots round trip")
{
    WaveConfig cfg;
    cfg.N = 16;
    cfg.T_final = 0.5;
    cfg.stride = 3;
    cfg.kind = WaveKind::nonlinear_damped;
    cfg.law = make_cubic_exp();
    cfg.field = CoefficientField::constant(1.0);
    const Grid grid(cfg.N);
    const auto run = solve(cfg, mixed_state(grid));
    std::ostringstream os;
    write_trace_csv(os, run.trace);
    CHECK(os.str().rfind("t,E,D,strong_norm,weak_norm\n", 0) == 0);
    const std::string path = "wavesim_snapshot_test.bin";
    write_snapshots(path, run);
    const auto back = read_snapshots(path);
    std::remove(path.c_str());
    CHECK(back.N == 16);
    CHECK(back.dt == run.dt);
    CHECK(back.stride == 3);
    REQUIRE(back.frames.size() == run.frames.size());
    for (std::size_t i = 0; i < back.frames.size(); ++i) {
        CHECK(back.frames[i].t == run.frames[i].t);
        CHECK(back.frames[i].w == run.frames[i].w);
        CHECK(back.frames[i].v == run.frames[i].v);
    }
}
