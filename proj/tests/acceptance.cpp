// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "decaylab/cli.hpp"
#include "decaylab/numerics.hpp"

using namespace decaylab;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

int threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double golden_max(const std::function<double(double)>& phi, double a, double b, int iters = 200)
{
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < iters; ++it) {
        const double c = b - gr * (b - a);
        const double d = a + gr * (b - a);
        if (phi(c) > phi(d)) b = d;
        else a = c;
    }
    return phi(0.5 * (a + b));
}

// 1. g = x^3, beta = 1: f(s) = 4s on [0, r0^2 / 2].
Outcome weight_closed_form()
{
    const WeightSystem ws(make_power_law(3.0), 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double s = 0.5 * ws.r0sq() * i / 999.0 * (1.0 - 1e-12);
        worst = std::max(worst, std::abs(ws.f(s) - 4.0 * s) / std::max(1.0, 4.0 * s));
    }
    return {worst <= 1e-8, fmt("max |f(s)-4s|/max(1,4s) = %.3g (tol 1e-8)", worst)};
}

// 2. Fenchel-Young on a 256 x 256 grid and R** = R.
Outcome fenchel_young()
{
    int violations = 0;
    double worst = 0.0;
    for (const auto& law : {make_power_law(3.0), make_cubic_exp()}) {
        const WeightSystem ws(law);
        const double top = ws.r0sq();
        const double ymax = 2.0 * ws.R_prime(top);
        for (int i = 0; i < 256; ++i) {
            const double x = top * i / 255.0;
            const double Rx = ws.R(x).value;
            for (int k = 0; k < 256; ++k) {
                const double y = ymax * k / 255.0;
                if (x * y > Rx + ws.conjugate(y) + 1e-14 * (1.0 + x * y)) ++violations;
            }
        }
        for (int i = 1; i <= 128; ++i) {
            const double x = top * i / 128.0 * (1.0 - 1e-9);
            const double sup = golden_max([&](double ly) { return x * std::exp(ly) - ws.conjugate(std::exp(ly)); },
                                          std::log(1e-300), std::log(ymax));
            const double Rx = ws.R(x).value;
            worst = std::max(worst, std::abs(sup - Rx) / Rx);
        }
    }
    return {violations == 0 && worst <= 1e-6,
            fmt("violations = %d, max |R**-R|/R = %.3g (tol 1e-6)", violations, worst)};
}

// 3. psi_r(z0) = z0 and the identity composite psi(z) = 2z - 1.
Outcome psi_fixed_point()
{
    double fixed = 0.0;
    double z0_err = 0.0;
    int maps = 0;
    GrowthSpec gs;
    gs.func = GrowthFunction::constant();
    for (const auto& law : {make_power_law(3.0), make_power_law(5.0), make_cubic_exp()}) {
        const WeightSystem ws(law);
        for (double r : {0.05, 0.5, 2.0}) {
            const auto h = make_composite(ws, gs, CompositeMode::main);
            const double top = h->domain_sup() * (1.0 - 1e-9);
            if (!(std::log(r) < h->log_value(top))) continue;
            const DecayMap map(h, r);
            ++maps;
            fixed = std::max(fixed, std::abs(map.psi(map.z0()) - map.z0()));
            // z0 = 1 / h^{-1}(r) with h^{-1} by independent bisection on log h.
            const double s = numerics::solve_increasing([&](double x) { return h->log_value(x); }, std::log(r), 0.0,
                                                        top, 1e-15);
            z0_err = std::max(z0_err, std::abs(map.z0() * s - 1.0));
        }
    }
    const DecayMap id(FunctionComposite::identity(), 1.0);
    fixed = std::max(fixed, std::abs(id.psi(id.z0()) - id.z0()));
    double ident = 0.0;
    for (double z = 1.0; z < 1e6; z *= 1.37) ident = std::max(ident, std::abs(id.psi(z) - (2.0 * z - 1.0)) / std::max(1.0, z));
    return {maps > 0 && fixed <= 1e-10 && ident <= 1e-8 && z0_err <= 1e-9,
            fmt("maps = %d, max |psi(z0)-z0| = %.3g (tol 1e-10), identity max err = %.3g (tol 1e-8), z0 rel err = %.3g",
                maps + 1, fixed, ident, z0_err)};
}

// 4. a = 1, T = 2: the observation functional equals 2 E for modes 1..16.
Outcome observation_identity()
{
    const auto a = CoefficientField::constant(1.0);
    double worst = 0.0;
    for (int n = 1; n <= 16; ++n) {
        for (const auto& [c, d] : {std::pair{0.0, 1.0}, std::pair{1.0 / (n * pi), 0.0}, std::pair{0.3 / (n * pi), 0.7}}) {
            const auto F = observation_functional(a, single_mode(n, c, d), 2.0, {256, 128});
            const double w = n * pi;
            const double E = 0.5 * (w * w * c * c + d * d);
            worst = std::max(worst, std::abs(F.value - 2.0 * E) / (2.0 * E));
        }
    }
    return {worst <= 1e-6, fmt("max |functional-2E|/2E = %.3g (tol 1e-6)", worst)};
}

// 5. Energy identity for a nonlinear run at N = 1024, second order in dt.
Outcome energy_identity()
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
    Eigen::VectorXd c = Eigen::VectorXd::Zero(5), d = Eigen::VectorXd::Zero(5);
    c[0] = 0.6;
    c[2] = 0.2;
    d[1] = 1.5;
    d[4] = -0.4;
    const auto init = state_from_modes(grid, c, d);
    double res[2];
    for (int i = 0; i < 2; ++i) {
        cfg.dt = (i == 0 ? 0.5 : 0.25) * grid.h();
        res[i] = energy_identity_residual(solve(cfg, init).trace);
    }
    const double ratio = res[0] / res[1];
    return {res[0] <= 1e-3 && ratio >= 3.0 && ratio <= 5.0,
            fmt("residual = %.3g at dt = h/2 (tol 1e-3), %.3g at h/4, ratio = %.3f (want [3,5])", res[0], res[1],
                ratio)};
}

// 6. Comparison chain on 200 random instances up to k = 1000.
Outcome comparison_chain()
{
    std::mt19937_64 rng(20260601);
    int violations = 0, premise = 0;
    double min_euler = INFINITY, min_ode = INFINITY;
    for (int i = 0; i < 200; ++i) {
        const auto inst = random_instance(rng);
        const auto E = recurrence_sequence(inst, 1000, i % 4 == 0 ? nullptr : &rng);
        const auto rep = check_chain(inst, E);
        premise += !rep.premise_ok;
        violations += !rep.holds;
        min_euler = std::min(min_euler, rep.min_slack_euler);
        min_ode = std::min(min_ode, rep.min_slack_ode);
    }
    return {violations == 0 && premise == 0,
            fmt("violations = %d, premise failures = %d, min slack Euler = %.3g, min slack ODE = %.3g", violations,
                premise, min_euler, min_ode)};
}

// 7. Sampled decay bound for recurrence-saturating sequences.
Outcome decay_bound()
{
    const double T = 2.0, rho_T = 0.5;
    int violations = 0, invalid = 0, samples = 0;
    double worst = 0.0;
    auto run = [&](const SequenceInstance& inst, double r) {
        const auto E = recurrence_sequence(inst, 260);
        std::vector<double> times;
        for (int k = 0; k <= 2000; ++k) times.push_back(2.0 * T + 198.0 * T * k / 2000.0);
        const auto rep = discretcont_bound(inst, E, times, r);
        if (!rep.premise_ok) {
            ++violations;
            return;
        }
        samples += int(rep.t.size());
        violations += rep.violations;
        for (bool v : rep.valid) invalid += !v;
        worst = std::max(worst, rep.max_ratio);
    };
    // F(x) = x, which is also x^{2/(p-1)} at p = 3.
    const double p = 3.0;
    const double e = 2.0 / (p - 1.0);
    run(make_instance_from_F([=](double x) { return std::pow(x, e); }, [=](double v) { return std::pow(v, 1.0 / e); },
                             0.9, rho_T, T, 1.0 / (2.0 * rho_T), "x^{2/(p-1)}"),
        4.0);
    run(make_instance_from_F([](double x) { return x; }, [](double v) { return v; }, 0.5, rho_T, T, 1.0, "x"), 4.0);
    return {violations == 0 && invalid == 0,
            fmt("samples = %d on [2T, 200T], violations = %d, undefined = %d, max Ehat/bound = %.3g", samples,
                violations, invalid, worst)};
}

// 8. log-log slope of the main envelope for g = x^p, G = 1.
Outcome asymptotic_slope()
{
    GrowthSpec gs;
    gs.func = GrowthFunction::constant();
    EnvelopeSpec env;
    env.r = 0.5;
    bool ok = true;
    std::string d;
    for (double p : {2.0, 3.0, 5.0}) {
        const auto E = make_main_envelope(WeightSystem(make_power_law(p)), gs, env);
        const auto a = E(1e3), b = E(1e6);
        const double slope = (std::log(b.value) - std::log(a.value)) / (std::log(1e6) - std::log(1e3));
        const double want = -2.0 / (p - 1.0);
        const bool good = a.valid && b.valid && std::abs(slope / want - 1.0) <= 0.05;
        ok = ok && good;
        d += fmt("p=%g slope %.4f (want %.4f) ", p, slope, want);
    }
    return {ok, d + "(tol 5%)"};
}

// 9. Logarithmic shapes of the mainbis and appendix envelopes.
Outcome log_shapes()
{
    bool ok = true;
    std::string d;
    for (double beta_obs : {0.5, 1.0}) {
        GrowthSpec gs;
        gs.kind = GrowthKind::H_for_A3;
        gs.func = GrowthFunction::exponential_obs(1.0, beta_obs);
        EnvelopeSpec env;
        env.r = 0.5;
        for (const auto& law : {make_power_law(3.0), make_cubic_exp()}) {
            const auto E = make_mainbis_envelope(WeightSystem(law), gs, env);
            // C calibrated at the first sample.
            double C = 0.0, lo = INFINITY, hi = 0.0;
            bool valid = true;
            for (double t = 1e2; t <= 1e8 * 1.0001; t *= std::sqrt(10.0)) {
                const auto v = E(t);
                valid = valid && v.valid;
                const double q = v.value * std::pow(std::log1p(t), 2.0 * beta_obs);
                if (C == 0.0) C = q;
                lo = std::min(lo, q / C);
                hi = std::max(hi, q / C);
            }
            const bool good = valid && lo >= 0.1 && hi <= 10.0;
            ok = ok && good;
            d += fmt("[beta=%g ratio in %.3g..%.3g] ", beta_obs, lo, hi);
        }
        // Appendix: norm shape sqrt(envelope) (ln(1+t))^beta constant.
        double spread = 0.0, ref = 0.0;
        for (double t = 1e2; t <= 1e8; t *= 10.0) {
            const double q = std::sqrt(envelope_linear_appendix(gs, t)) * std::pow(std::log1p(t), beta_obs);
            if (ref == 0.0) ref = q;
            spread = std::max(spread, std::abs(q / ref - 1.0));
        }
        ok = ok && spread <= 1e-10;
        d += fmt("[appendix norm spread %.2g] ", spread);
    }
    return {ok, d + "(factor 10)"};
}

// 10. Lemma inequalities on the deterministic suite plus 50 random data.
Outcome lemma_constants()
{
    const auto law = make_power_law(3.0);
    const auto field = CoefficientField::bump(0.4, 0.6, 1.0, 1.0);
    const WeightSystem ws(law, 1.0);
    auto data = deterministic_suite(32);
    const auto r = random_suite(7, 50, 32);
    data.insert(data.end(), r.begin(), r.end());
    const double T = 1.0;
    const auto results = parallel_map(int(data.size()), threads(), [&](int i) {
        return std::vector<LemmaResult>{check_lemma_linear_vs_nonlinear(law, field, data[i], T),
                                        check_lemma_phiz(field, data[i], T),
                                        check_lemma_kinetic(law, ws, field, data[i], T)};
    });
    int fails = 0, total = 0, ood = 0;
    double tightest = INFINITY;
    for (const auto& v : results) {
        for (const auto& x : v) {
            ++total;
            fails += !x.passed;
            ood += x.out_of_domain;
            if (!x.out_of_domain && x.rhs > 0.0) tightest = std::min(tightest, x.margin() / x.rhs);
        }
    }
    return {fails == 0 && total == 3 * int(data.size()),
            fmt("data = %zu, checks = %d, failures = %d, out of domain = %d, tightest relative margin = %.3g",
                data.size(), total, fails, ood, tightest)};
}

// 11. End-to-end compare with cubic damping and localized a, run twice.
Outcome end_to_end()
{
    auto cfg = parse_config(example_config());
    cfg.task = Task::compare;
    const auto base = fs::temp_directory_path() / "decaylab_acceptance";
    fs::remove_all(base);
    std::string bytes[2];
    TaskResult res;
    for (int i = 0; i < 2; ++i) {
        cfg.output_dir = (base / ("run" + std::to_string(i))).string();
        cfg.threads = i == 0 ? 1 : threads();
        res = run_compare(cfg);
        for (const char* name : {"compare.csv", "compare.json"}) {
            std::ifstream is(fs::path(cfg.output_dir) / name, std::ios::binary);
            std::stringstream ss;
            ss << is.rdbuf();
            bytes[i] += ss.str();
        }
    }
    const bool same = bytes[0] == bytes[1];
    return {res.status == 0 && same,
            fmt("t* = %.4g, C = %.4g, samples = %d, violations = %d, max E/envelope = %.4g, byte-identical = %s",
                res.summary["t_star"].get<double>(), res.summary["calibration_constant"].get<double>(),
                res.summary["samples_checked"].get<int>(), res.summary["violations"].get<int>(),
                res.summary["max_ratio"].get<double>(), same ? "yes" : "no")};
}

} // namespace

int main()
{
    const std::pair<const char*, Outcome (*)()> criteria[] = {
        {"weight closed form", weight_closed_form},
        {"Fenchel-Young and biconjugation", fenchel_young},
        {"psi_r fixed point", psi_fixed_point},
        {"conservative observation identity", observation_identity},
        {"energy identity", energy_identity},
        {"comparison chain", comparison_chain},
        {"decay bound", decay_bound},
        {"asymptotic slope", asymptotic_slope},
        {"logarithmic shapes", log_shapes},
        {"lemma constants", lemma_constants},
        {"end-to-end compare", end_to_end},
    };
    int failed = 0, idx = 0;
    for (const auto& [name, fn] : criteria) {
        ++idx;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", idx, name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", idx - failed, idx);
    return failed == 0 ? 0 : 1;
}
