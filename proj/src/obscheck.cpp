#include "decaylab/obscheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "decaylab/numerics.hpp"

namespace decaylab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double lam(int n) { return Grid::lambda(n); }

double datum_energy(const Datum& d)
{
    double e = 0.0;
    for (Eigen::Index i = 0; i < d.c.size(); ++i) e += lam(int(i) + 1) * d.c[i] * d.c[i] + d.d[i] * d.d[i];
    return 0.5 * e;
}

double datum_strong_sq(const Datum& d)
{
    double e = 0.0;
    for (Eigen::Index i = 0; i < d.c.size(); ++i) {
        const double l = lam(int(i) + 1);
        e += l * l * d.c[i] * d.c[i] + l * d.d[i] * d.d[i];
    }
    return e;
}

double datum_weak_sq(const Datum& d, double alpha)
{
    double e = 0.0;
    for (Eigen::Index i = 0; i < d.c.size(); ++i) {
        const double l = lam(int(i) + 1);
        e += std::pow(l, 2.0 * alpha) * d.c[i] * d.c[i] + std::pow(l, 2.0 * alpha - 1.0) * d.d[i] * d.d[i];
    }
    return e;
}

std::string fmt(const char* f, double a, double b = 0.0)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

} // namespace

int Datum::max_mode() const
{
    int m = 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (c[i] != 0.0 || d[i] != 0.0) m = int(i) + 1;
    }
    return m;
}

Datum Datum::scaled(double s) const { return {label, s * c, s * d}; }

WaveState Datum::state(const Grid& grid) const
{
    if (c.size() > grid.N()) throw ConfigError("datum has more modes than the grid");
    return state_from_modes(grid, c, d);
}

Datum single_mode(int n, double c, double d)
{
    if (n < 1) throw ConfigError("mode numbers start at 1");
    Datum out;
    out.label = "mode " + std::to_string(n);
    out.c = Eigen::VectorXd::Zero(n);
    out.d = Eigen::VectorXd::Zero(n);
    out.c[n - 1] = c;
    out.d[n - 1] = d;
    return out;
}

std::vector<Datum> deterministic_suite(int max_mode)
{
    std::vector<Datum> out;
    for (int n = 1; n <= max_mode; ++n) out.push_back(single_mode(n, 0.0, 1.0));
    std::vector<int> picks;
    for (int n : {1, 2, 3, 5, 8, 13, 21, 32}) {
        if (n <= max_mode) picks.push_back(n);
    }
    const double pi = std::numbers::pi;
    for (std::size_t i = 0; i < picks.size(); ++i) {
        for (std::size_t k = i + 1; k < picks.size(); ++k) {
            const int n = picks[i], m = picks[k];
            Datum d;
            d.label = "modes " + std::to_string(n) + "+" + std::to_string(m);
            d.c = Eigen::VectorXd::Zero(m);
            d.d = Eigen::VectorXd::Zero(m);
            d.c[n - 1] = 1.0 / (n * pi);
            d.d[m - 1] = 0.5;
            out.push_back(d);
        }
    }
    return out;
}

std::vector<Datum> random_suite(std::uint64_t seed, int count, int max_mode)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> n_active(1, 4);
    std::uniform_int_distribution<int> mode(1, max_mode);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double pi = std::numbers::pi;
    std::vector<Datum> out;
    for (int i = 0; i < count; ++i) {
        Datum d;
        d.label = "random " + std::to_string(i);
        d.c = Eigen::VectorXd::Zero(max_mode);
        d.d = Eigen::VectorXd::Zero(max_mode);
        const int k = n_active(rng);
        for (int j = 0; j < k; ++j) {
            const int n = mode(rng);
            d.c[n - 1] += gauss(rng) / (n * pi);
            d.d[n - 1] += gauss(rng);
        }
        // Trim to the highest active mode so resolution requirements stay tight.
        const int top = std::max(1, d.max_mode());
        d.c.conservativeResize(top);
        d.d.conservativeResize(top);
        out.push_back(d);
    }
    return out;
}

QuadratureValue observation_functional(const CoefficientField& field, const std::vector<WaveState>& frames, double T,
                                       int max_mode)
{
    if (frames.size() < 3) throw ConfigError("observation functional needs at least three frames");
    const int n = int(frames.size()) - 1;
    const double dt = (frames.back().t - frames.front().t) / n;
    if (std::abs(frames.back().t - frames.front().t - T) > 1e-9 * std::max(1.0, T)) {
        throw ConfigError("observation functional: frames do not span [0, T]");
    }
    const double period = 2.0 / std::max(1, max_mode);
    if (dt > period / 40.0 * (1.0 + 1e-12)) {
        const int needed = static_cast<int>(std::ceil(40.0 * T / period));
        throw ConfigError("observation functional: under-resolved trajectory, need at least " +
                          std::to_string(needed + 1) + " frames");
    }
    const int N = int(frames.front().v.size());
    const Grid grid(N);
    Eigen::VectorXd a(N);
    for (int j = 0; j < N; ++j) a[j] = field(grid.x(j));
    std::vector<double> s(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        s[i] = grid.h() * a.dot(frames[i].v.cwiseAbs2());
    }
    auto trap = [&](int step) {
        double acc = 0.5 * (s.front() + s.back());
        for (int i = step; i < n; i += step) acc += s[i];
        return acc * dt * step;
    };
    QuadratureValue out;
    out.value = trap(1);
    if (n % 2 == 0) out.error = std::abs(out.value - trap(2)) / 3.0;
    return out;
}

std::vector<WaveState> conservative_trajectory(const Grid& grid, const Datum& datum, double T,
                                               int samples_per_period)
{
    const int top = std::max(1, datum.max_mode());
    if (top > grid.N()) throw ConfigError("datum has more modes than the grid");
    const double period = 2.0 / top;
    int steps = static_cast<int>(std::ceil(T / (period / samples_per_period)));
    if (steps % 2) ++steps;
    WaveConfig cfg;
    cfg.N = grid.N();
    cfg.kind = WaveKind::conservative;
    cfg.scheme = WaveScheme::spectral;
    cfg.modes = int(datum.c.size());
    cfg.dt = T / steps;
    cfg.T_final = T;
    return solve(cfg, datum.state(grid)).frames;
}

QuadratureValue observation_functional(const CoefficientField& field, const Datum& datum, double T,
                                       ObservationOptions opt)
{
    const Grid grid(opt.N);
    const auto frames = conservative_trajectory(grid, datum, T, opt.samples_per_period);
    return observation_functional(field, frames, T, std::max(1, datum.max_mode()));
}

nlohmann::json ObservabilityReport::to_json() const
{
    nlohmann::json j;
    j["check"] = check;
    j["T"] = T;
    j["constant"] = constant;
    j["claimed"] = std::isfinite(claimed) ? nlohmann::json(claimed) : nlohmann::json(nullptr);
    j["worst_index"] = worst_index;
    j["passed"] = passed;
    j["data"] = nlohmann::json::array();
    for (const auto& d : data) {
        j["data"].push_back({{"index", d.index},
                             {"label", d.label},
                             {"energy", d.energy},
                             {"strong_sq", d.strong_sq},
                             {"weak_sq", d.weak_sq},
                             {"functional", d.functional},
                             {"functional_error", d.functional_error},
                             {"growth_argument", d.growth_argument},
                             {"growth_value", d.growth_value},
                             {"admissible", std::isfinite(d.admissible) ? nlohmann::json(d.admissible)
                                                                        : nlohmann::json(nullptr)},
                             {"vacuous", d.vacuous},
                             {"passed", d.passed}});
    }
    return j;
}

void ObservabilityReport::write_csv(std::ostream& os) const
{
    os << "index,label,energy,strong_sq,weak_sq,functional,functional_error,growth_argument,growth_value,"
          "admissible,vacuous,passed\n";
    char buf[512];
    for (const auto& d : data) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", d.index,
                      d.label.c_str(), d.energy, d.strong_sq, d.weak_sq, d.functional, d.functional_error,
                      d.growth_argument, d.growth_value, d.admissible, int(d.vacuous), int(d.passed));
        os << buf;
    }
}

namespace {

ObservabilityReport run_check(const std::string& name, const CoefficientField& field, double T,
                              const std::vector<Datum>& data, double claimed, ObservationOptions opt,
                              const std::function<void(const Datum&, DatumResult&)>& fill)
{
    if (!(T > 0.0)) throw ConfigError("observability check: T must be positive");
    ObservabilityReport rep;
    rep.check = name;
    rep.T = T;
    rep.claimed = claimed;
    rep.constant = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
        DatumResult r;
        r.index = int(i);
        r.label = data[i].label;
        r.energy = datum_energy(data[i]);
        if (!(r.energy > 0.0)) throw ConfigError("observability check: datum " + r.label + " is zero");
        r.strong_sq = datum_strong_sq(data[i]);
        const auto F = observation_functional(field, data[i], T, opt);
        r.functional = F.value;
        r.functional_error = F.error;
        fill(data[i], r);
        if (r.vacuous) {
            r.admissible = std::numeric_limits<double>::infinity();
        } else if (r.admissible < rep.constant) {
            rep.constant = r.admissible;
            rep.worst_index = r.index;
        }
        if (std::isfinite(claimed)) {
            // claimed * (lhs without constant) <= functional within its quadrature error
            const double lhs = r.vacuous ? 0.0 : claimed * r.functional / r.admissible;
            r.passed = r.vacuous || lhs <= r.functional + r.functional_error + 1e-12 * r.functional;
        } else {
            r.passed = r.vacuous || r.admissible > 0.0;
        }
        rep.passed = rep.passed && r.passed;
        rep.data.push_back(r);
    }
    if (!std::isfinite(rep.constant)) rep.constant = 0.0;
    return rep;
}

} // namespace

ObservabilityReport check_A2(const CoefficientField& field, const GrowthSpec& gs, double T,
                             const std::vector<Datum>& data, double claimed, ObservationOptions opt)
{
    gs.validate();
    if (gs.kind == GrowthKind::H_for_A3) throw ConfigError("check_A2 needs growth kind G or identity");
    const double alpha = gs.weak_norm_exponent();
    const GrowthFunction G = gs.kind == GrowthKind::identity ? GrowthFunction::identity() : gs.func;
    return run_check("A2", field, T, data, claimed, opt, [&](const Datum& d, DatumResult& r) {
        r.weak_sq = datum_weak_sq(d, alpha);
        r.growth_argument = r.weak_sq / r.energy;
        r.growth_value = G(r.growth_argument);
        r.vacuous = r.growth_value == 0.0;
        if (!r.vacuous) r.admissible = r.functional / (r.energy * r.growth_value);
    });
}

ObservabilityReport check_A3(const CoefficientField& field, const GrowthSpec& gs, double T,
                             const std::vector<Datum>& data, double claimed, ObservationOptions opt)
{
    gs.validate();
    if (gs.kind == GrowthKind::G_for_A2) throw ConfigError("check_A3 needs growth kind H or identity");
    const GrowthFunction H = gs.kind == GrowthKind::identity ? GrowthFunction::identity() : gs.func;
    return run_check("A3", field, T, data, claimed, opt, [&](const Datum&, DatumResult& r) {
        r.weak_sq = kNaN;
        r.growth_argument = r.energy / r.strong_sq;
        r.growth_value = H(r.growth_argument);
        r.vacuous = r.growth_value == 0.0;
        if (!r.vacuous) r.admissible = r.functional / (r.strong_sq * r.growth_value);
    });
}

nlohmann::json ExponentialFit::to_json() const
{
    return {{"c_T", c_T},         {"beta", beta},         {"intercept", intercept}, {"residual", residual},
            {"degenerate", degenerate}, {"betas", betas}, {"residuals", residuals}, {"slopes", slopes},
            {"modes", modes},     {"ratios", ratios},     {"log_values", log_values},
            {"note", "empirical estimate"}};
}

ExponentialFit fit_exponential_observability(const CoefficientField& field, double T,
                                             const std::vector<double>& beta_grid, int mode_lo, int mode_hi,
                                             ObservationOptions opt)
{
    if (mode_lo < 1 || mode_hi < mode_lo + 2) throw ConfigError("exponential fit needs at least three modes");
    if (beta_grid.empty()) throw ConfigError("exponential fit needs a beta grid");
    if (mode_hi * 4 > opt.N) opt.N = mode_hi * 4;
    ExponentialFit fit;
    std::vector<double> per_energy;
    for (int n = mode_lo; n <= mode_hi; ++n) {
        const Datum d = single_mode(n, 0.0, 1.0);
        const double E = datum_energy(d);
        const double strong_sq = datum_strong_sq(d);
        const double F = observation_functional(field, d, T, opt).value;
        fit.modes.push_back(n);
        fit.ratios.push_back(std::sqrt(strong_sq / (2.0 * E)));
        fit.log_values.push_back(std::log(F / strong_sq));
        per_energy.push_back(F / E);
    }
    const auto [lo, hi] = std::minmax_element(per_energy.begin(), per_energy.end());
    if (!(*hi > 0.0) || (*hi - *lo) <= 1e-8 * *hi) {
        fit.degenerate = true;
        return fit;
    }
    const std::size_t m = fit.modes.size();
    double best = std::numeric_limits<double>::infinity();
    bool best_positive = false;
    for (double beta : beta_grid) {
        if (!(beta > 0.0)) throw ConfigError("exponential fit: beta must be positive");
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::vector<double> X(m);
        for (std::size_t i = 0; i < m; ++i) {
            X[i] = std::pow(fit.ratios[i], 1.0 / beta);
            sx += X[i];
            sy += fit.log_values[i];
            sxx += X[i] * X[i];
            sxy += X[i] * fit.log_values[i];
        }
        const double denom = m * sxx - sx * sx;
        const double slope = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
        const double icpt = (sy - slope * sx) / m;
        double rss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double e = fit.log_values[i] - (icpt + slope * X[i]);
            rss += e * e;
        }
        const double rms = std::sqrt(rss / m);
        fit.betas.push_back(beta);
        fit.residuals.push_back(rms);
        fit.slopes.push_back(slope);
        const bool positive = -slope > 0.0;
        // Prefer fits with a positive constant; among those the smallest residual.
        if ((positive && !best_positive) || (positive == best_positive && rms < best)) {
            best = rms;
            best_positive = positive;
            fit.beta = beta;
            fit.c_T = -slope;
            fit.intercept = icpt;
            fit.residual = rms;
        }
    }
    return fit;
}

nlohmann::json LemmaResult::to_json() const
{
    return {{"lemma", lemma},        {"label", label},     {"lhs", lhs},
            {"rhs", rhs},            {"margin", margin()}, {"tolerance", tolerance},
            {"passed", passed},      {"out_of_domain", out_of_domain}, {"details", details}};
}

namespace {

struct RunPair {
    double coarse;
    double fine;
};

EnergyTrace leapfrog_trace(WaveKind kind, const DampingLaw& law, const CoefficientField& field, const WaveState& s,
                           double T, int N, double dt)
{
    WaveConfig cfg;
    cfg.N = N;
    cfg.dt = dt;
    cfg.T_final = T;
    cfg.kind = kind;
    cfg.law = law;
    cfg.field = field;
    cfg.keep_frames = false;
    cfg.stride = 1 << 30;
    return solve(cfg, s).trace;
}

template <typename Fn>
RunPair at_two_steps(const LemmaOptions& opt, Fn&& fn)
{
    const double h = 1.0 / (opt.N + 1);
    return {fn(opt.dt_factor * h), fn(0.5 * opt.dt_factor * h)};
}

double diff(const RunPair& p) { return std::abs(p.coarse - p.fine); }

} // namespace

double k_T_constant(const CoefficientField& field, double T)
{
    const double a = field.sup_norm();
    return 8.0 * T * T * a * a + 2.0;
}

double weighted_measure(const CoefficientField& field)
{
    const int n = 8192;
    double s = 0.5 * (field(0.0) + field(1.0));
    for (int i = 1; i < n; ++i) s += field(double(i) / n);
    return s / n;
}

LemmaResult check_lemma_linear_vs_nonlinear(const DampingLaw& law, const CoefficientField& field, const Datum& datum,
                                            double T, LemmaOptions opt)
{
    const Grid grid(opt.N);
    const auto s = datum.state(grid);
    const auto lhs = at_two_steps(opt, [&](double dt) {
        return leapfrog_trace(WaveKind::linear_damped, law, field, s, T, opt.N, dt).a_v_sq.back();
    });
    double kin_f = 0.0, fb_f = 0.0;
    const auto rhs = at_two_steps(opt, [&](double dt) {
        const auto tr = leapfrog_trace(WaveKind::nonlinear_damped, law, field, s, T, opt.N, dt);
        kin_f = tr.a_v_sq.back();
        fb_f = tr.a_rho_sq.back();
        return 2.0 * (kin_f + fb_f);
    });
    LemmaResult r;
    r.lemma = "linear_vs_nonlinear";
    r.label = datum.label;
    r.lhs = lhs.fine;
    r.rhs = rhs.fine;
    r.tolerance = diff(lhs) + diff(rhs) + 1e-14 * std::max(r.lhs, r.rhs);
    r.passed = r.lhs <= r.rhs + r.tolerance;
    r.details = {{"int_a_wt_sq", kin_f}, {"int_a_rho_sq", fb_f}};
    return r;
}

LemmaResult check_lemma_phiz(const CoefficientField& field, const Datum& datum, double T, LemmaOptions opt)
{
    const Grid grid(opt.N);
    const auto s = datum.state(grid);
    const auto law = make_linear_law();
    const auto phi = at_two_steps(opt, [&](double dt) {
        return leapfrog_trace(WaveKind::conservative, law, field, s, T, opt.N, dt).a_v_sq.back();
    });
    const auto z = at_two_steps(opt, [&](double dt) {
        return leapfrog_trace(WaveKind::linear_damped, law, field, s, T, opt.N, dt).a_v_sq.back();
    });
    const double kT = k_T_constant(field, T) + opt.kT_offset;
    LemmaResult r;
    r.lemma = "phiz";
    r.label = datum.label;
    r.lhs = phi.fine;
    r.rhs = kT * z.fine;
    r.tolerance = diff(phi) + kT * diff(z) + 1e-14 * std::max(r.lhs, r.rhs);
    r.passed = r.lhs <= r.rhs + r.tolerance;
    r.details = {{"k_T", kT}, {"int_a_zt_sq", z.fine}};
    return r;
}

LemmaResult check_lemma_kinetic(const DampingLaw& law, const WeightSystem& ws, const CoefficientField& field,
                                const Datum& datum, double T, LemmaOptions opt)
{
    LemmaResult r;
    r.lemma = "kinetic";
    r.label = datum.label;
    const double E = datum_energy(datum);
    const double strong_sq = datum_strong_sq(datum);
    const double Ehat0 = E / strong_sq;
    const double c5 = weighted_measure(field) * (1.0 + law.c2() * law.c2());
    const double c6 = 1.0 / law.c1() + law.c2();
    r.details = {{"Ehat0", Ehat0}, {"c5", c5}, {"c6", c6}};
    if (!(Ehat0 < ws.f_domain_sup())) {
        r.out_of_domain = true;
        r.passed = true;
        r.details["note"] = fmt("E/||datum||^2 = %.6g is outside the weight domain [0, %.6g)", Ehat0,
                                ws.f_domain_sup());
        return r;
    }
    const double f = ws.f(Ehat0);
    const double Rstar = ws.conjugate(f);
    const Grid grid(opt.N);
    const auto s = datum.state(grid);
    double D_f = 0.0, kin_f = 0.0;
    double rhs_runs[2] = {0.0, 0.0};
    int run = 0;
    const auto lhs = at_two_steps(opt, [&](double dt) {
        const auto tr = leapfrog_trace(WaveKind::nonlinear_damped, law, field, s, T, opt.N, dt);
        kin_f = tr.a_v_sq.back() + tr.a_rho_sq.back();
        D_f = tr.dissipation.back();
        // Runs come coarse first, then fine.
        rhs_runs[run++] = c5 * T * Rstar + c6 * (f + 1.0) * D_f;
        return f * kin_f;
    });
    const RunPair rhs{rhs_runs[0], rhs_runs[1]};
    r.lhs = lhs.fine;
    r.rhs = rhs.fine;
    r.tolerance = diff(lhs) + diff(rhs) + 1e-14 * std::max(r.lhs, r.rhs);
    r.passed = r.lhs <= r.rhs + r.tolerance;
    r.details["f"] = f;
    r.details["R_star_f"] = Rstar;
    r.details["dissipation"] = D_f;
    r.details["int_a_wt_sq_plus_rho_sq"] = kin_f;
    return r;
}

} // namespace decaylab
