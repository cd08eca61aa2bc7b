#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "decaylab/obscheck.hpp"

using namespace decaylab;

namespace {

constexpr double pi = std::numbers::pi;

double energy_of(const Datum& d)
{
    double e = 0.0;
    for (Eigen::Index i = 0; i < d.c.size(); ++i) {
        const double w = (i + 1) * pi;
        e += w * w * d.c[i] * d.c[i] + d.d[i] * d.d[i];
    }
    return 0.5 * e;
}

// int_0^T int a |phi_t|^2 for one mode, phi_t = (-c w sin wt + d cos wt) sqrt2 sin(n pi x),
// using Simpson in time on a fine grid and Simpson in space.
double single_mode_oracle(const std::function<double(double)>& a, int n, double c, double d, double T)
{
    const int nx = 4000;
    double space = 0.0;
    for (int i = 0; i <= nx; ++i) {
        const double x = double(i) / nx;
        const double wgt = (i == 0 || i == nx) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double s = std::sin(n * pi * x);
        space += wgt * a(x) * 2.0 * s * s;
    }
    space /= 3.0 * nx;
    const double w = n * pi;
    const int nt = 20000;
    double time = 0.0;
    for (int i = 0; i <= nt; ++i) {
        const double t = T * i / nt;
        const double wgt = (i == 0 || i == nt) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double q = -c * w * std::sin(w * t) + d * std::cos(w * t);
        time += wgt * q * q;
    }
    time *= T / (3.0 * nt);
    return space * time;
}

} // namespace

TEST_CASE("full observation with a = 1 and T = 2 gives twice the energy")
{
    const auto a = CoefficientField::constant(1.0);
    std::vector<Datum> data;
    for (int n = 1; n <= 16; ++n) data.push_back(single_mode(n, 0.3 / (n * pi), 1.0));
    Datum mix;
    mix.c = Eigen::VectorXd::Zero(16);
    mix.d = Eigen::VectorXd::Zero(16);
    for (int n = 1; n <= 16; ++n) {
        mix.c[n - 1] = std::cos(n) / (n * pi);
        mix.d[n - 1] = std::sin(2.0 * n);
    }
    data.push_back(mix);
    for (const auto& d : data) {
        const auto F = observation_functional(a, d, 2.0);
        const double E = energy_of(d);
        CHECK(std::abs(F.value - 2.0 * E) <= 1e-6 * 2.0 * E);
    }
}

TEST_CASE("functional matches an independent quadrature for localized coefficients")
{
    const auto a = CoefficientField::bump(0.2, 0.45, 1.0, 1.0);
    const std::function<double(double)> af = [&](double x) { return a(x); };
    for (int n : {1, 3, 7}) {
        const double T = 1.3;
        const auto F = observation_functional(a, single_mode(n, 0.1, 0.7), T, {512, 256});
        const double ref = single_mode_oracle(af, n, 0.1, 0.7, T);
        CHECK(F.value == doctest::Approx(ref).epsilon(2e-4));
    }
}

TEST_CASE("functional is zero without damping and quadratic under scaling")
{
    const auto d = deterministic_suite(8)[10];
    CHECK(observation_functional(CoefficientField::zero(), d, 1.5).value == 0.0);
    const auto a = CoefficientField::indicator(0.1, 0.3, 2.0);
    const double base = observation_functional(a, d, 1.5).value;
    CHECK(base > 0.0);
    CHECK(observation_functional(a, d.scaled(3.0), 1.5).value == doctest::Approx(9.0 * base).epsilon(1e-12));
}

TEST_CASE("under-resolved trajectories are rejected")
{
    const Grid grid(64);
    const auto d = single_mode(10, 0.0, 1.0);
    const auto frames = conservative_trajectory(grid, d, 1.0, 8);
    CHECK_THROWS_AS(observation_functional(CoefficientField::constant(1.0), frames, 1.0, 10), ConfigError);
    const auto fine = conservative_trajectory(grid, d, 1.0, 64);
    CHECK_NOTHROW(observation_functional(CoefficientField::constant(1.0), fine, 1.0, 10));
}

TEST_CASE("A3 with identity growth and full observation has constant 2")
{
    GrowthSpec gs;
    gs.kind = GrowthKind::identity;
    const auto rep = check_A3(CoefficientField::constant(1.0), gs, 2.0, deterministic_suite(12));
    CHECK(rep.passed);
    CHECK(rep.constant == doctest::Approx(2.0).epsilon(1e-6));
    for (const auto& r : rep.data) CHECK(r.admissible == doctest::Approx(2.0).epsilon(1e-6));
    const auto claimed = check_A3(CoefficientField::constant(1.0), gs, 2.0, deterministic_suite(12), 2.0);
    CHECK(claimed.passed);
    const auto too_big = check_A3(CoefficientField::constant(1.0), gs, 2.0, deterministic_suite(12), 2.5);
    CHECK_FALSE(too_big.passed);
}

TEST_CASE("A2 admissible constants are scale invariant")
{
    GrowthSpec gs;
    gs.kind = GrowthKind::G_for_A2;
    gs.func = GrowthFunction::power(1.0);
    gs.theta = 0.75;
    const auto a = CoefficientField::bump(0.3, 0.6, 0.5, 1.0);
    auto data = random_suite(7, 6, 10);
    std::vector<Datum> scaled;
    for (const auto& d : data) scaled.push_back(d.scaled(0.01));
    const auto r1 = check_A2(a, gs, 2.0, data);
    const auto r2 = check_A2(a, gs, 2.0, scaled);
    REQUIRE(r1.data.size() == r2.data.size());
    for (std::size_t i = 0; i < r1.data.size(); ++i) {
        CHECK(r1.data[i].admissible == doctest::Approx(r2.data[i].admissible).epsilon(1e-10));
    }
    CHECK(r1.constant > 0.0);
    std::ostringstream os;
    r1.write_csv(os);
    CHECK(os.str().rfind("index,label,energy", 0) == 0);
    CHECK(r1.to_json()["data"].size() == data.size());
}

TEST_CASE("A2 with constant G on full observation reduces to the energy identity")
{
    GrowthSpec gs;
    gs.func = GrowthFunction::constant(1.0);
    const auto rep = check_A2(CoefficientField::constant(1.0), gs, 2.0, random_suite(3, 10, 16));
    CHECK(rep.constant == doctest::Approx(2.0).epsilon(1e-6));
    CHECK_THROWS_AS(check_A2(CoefficientField::constant(1.0), GrowthSpec{GrowthKind::H_for_A3}, 2.0, {}), ConfigError);
}

TEST_CASE("exponential fit")
{
    std::vector<double> betas{0.5, 1.0, 2.0};
    const auto flat = fit_exponential_observability(CoefficientField::constant(1.0), 2.0, betas, 1, 8);
    CHECK(flat.degenerate);
    const auto loc = fit_exponential_observability(CoefficientField::indicator(0.05, 0.15, 1.0), 1.0, betas, 1, 12);
    CHECK_FALSE(loc.degenerate);
    CHECK(loc.betas.size() == 3);
    CHECK(std::isfinite(loc.residual));
    CHECK(loc.to_json()["note"] == "empirical estimate");
    CHECK_THROWS_AS(fit_exponential_observability(CoefficientField::constant(1.0), 2.0, betas, 3, 4), ConfigError);
}

TEST_CASE("constants")
{
    CHECK(k_T_constant(CoefficientField::constant(1.0), 2.0) == doctest::Approx(34.0));
    CHECK(k_T_constant(CoefficientField::zero(), 5.0) == doctest::Approx(2.0));
    CHECK(weighted_measure(CoefficientField::constant(3.0)) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(weighted_measure(CoefficientField::indicator(0.25, 0.5, 2.0)) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("linear versus nonlinear lemma")
{
    const auto a = CoefficientField::bump(0.2, 0.5, 1.0, 1.0);
    LemmaOptions opt;
    opt.N = 64;
    // With rho = Id both sides coincide up to the factor 2.
    const auto same = check_lemma_linear_vs_nonlinear(make_linear_law(), a, single_mode(2, 0.0, 1.0), 1.0, opt);
    CHECK(same.passed);
    CHECK(same.rhs == doctest::Approx(4.0 * same.lhs).epsilon(1e-9));
    const auto law = make_power_law(3.0);
    for (const auto& d : deterministic_suite(6)) {
        const auto r = check_lemma_linear_vs_nonlinear(law, a, d, 1.0, opt);
        CHECK_MESSAGE(r.passed, r.label);
    }
    const auto zero = check_lemma_linear_vs_nonlinear(law, CoefficientField::zero(), single_mode(1, 0.0, 1.0), 1.0, opt);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.passed);
}

TEST_CASE("phi versus z lemma")
{
    LemmaOptions opt;
    opt.N = 64;
    const auto full = CoefficientField::constant(1.0);
    const auto r = check_lemma_phiz(full, single_mode(1, 0.0, 1.0), 2.0, opt);
    CHECK(r.passed);
    CHECK(r.details["k_T"].get<double>() == doctest::Approx(34.0));
    const auto loc = CoefficientField::indicator(0.1, 0.3, 2.0);
    for (const auto& d : random_suite(11, 8, 12)) CHECK_MESSAGE(check_lemma_phiz(loc, d, 1.0, opt).passed, d.label);
}

TEST_CASE("kinetic lemma")
{
    LemmaOptions opt;
    opt.N = 64;
    const auto law = make_power_law(3.0);
    const WeightSystem ws(law, 4.0);
    const auto a = CoefficientField::bump(0.2, 0.5, 1.0, 1.0);
    int in_domain = 0;
    for (const auto& d : deterministic_suite(6)) {
        const auto r = check_lemma_kinetic(law, ws, a, d, 1.0, opt);
        CHECK_MESSAGE(r.passed, r.label);
        if (!r.out_of_domain) {
            ++in_domain;
            CHECK(r.lhs >= 0.0);
            CHECK(r.rhs > 0.0);
        }
    }
    CHECK(in_domain > 0);
}
