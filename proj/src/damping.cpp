#include "decaylab/damping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "decaylab/numerics.hpp"

namespace decaylab {

namespace {

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

} // namespace

std::string to_string(DampingFamily family)
{
    switch (family) {
    case DampingFamily::power: return "power";
    case DampingFamily::cubic_exp: return "cubic_exp";
    case DampingFamily::linear: return "linear";
    case DampingFamily::custom: return "custom";
    }
    return "custom";
}

DampingFamily damping_family_from_string(const std::string& name)
{
    if (name == "power") return DampingFamily::power;
    if (name == "cubic_exp") return DampingFamily::cubic_exp;
    if (name == "linear") return DampingFamily::linear;
    if (name == "custom") return DampingFamily::custom;
    throw ConfigError("unknown damping family '" + name + "'");
}

DampingLaw::DampingLaw(Parts parts)
    : family_(parts.family), exponent_(parts.exponent), g_(std::move(parts.g)), g_prime_(std::move(parts.g_prime)),
      log_g_(std::move(parts.log_g)), elasticity_(std::move(parts.elasticity)), rho_(std::move(parts.rho)),
      rho_prime_(std::move(parts.rho_prime)), g1_(0.0), c1_(parts.c1), c2_(parts.c2), r0_(parts.r0)
{
    if (!g_) {
        throw ConfigError("damping law needs g");
    }
    g1_ = g_(1.0);
    if (!(g1_ > 0.0) || !std::isfinite(g1_)) {
        throw ConfigError("damping law: g(1) must be positive and finite");
    }
    if (c1_ <= 0.0) c1_ = std::min(1.0, g1_);
    if (c2_ <= 0.0) c2_ = std::max(1.0, 1.0 / g1_);
    if (c1_ > c2_) {
        throw ConfigError("damping law: sector constants need 0 < c1 <= c2");
    }
    if (r0_ <= 0.0) {
        r0_ = default_r0(g_);
    }
    if (r0_ > 1.0) {
        throw ConfigError("damping law: r0 must lie in (0, 1]");
    }
}

double DampingLaw::g(double x) const
{
    const double ax = std::abs(x);
    if (ax > 1.0) {
        // Linear continuation matching the default feedback beyond |v| = 1.
        return sign_of(x) * (g1_ + (ax - 1.0));
    }
    return sign_of(x) * g_(ax);
}

double DampingLaw::g_prime(double x) const
{
    const double ax = std::abs(x);
    if (ax > 1.0) return 1.0;
    if (g_prime_) return g_prime_(ax);
    const double h = 1e-7 * std::max(1.0, ax);
    const double lo = std::max(0.0, ax - h);
    const double hi = ax + h;
    return (g(hi) - g(lo)) / (hi - lo);
}

double DampingLaw::log_g(double u) const
{
    if (u <= 0.0) return -std::numeric_limits<double>::infinity();
    if (log_g_) return log_g_(u);
    return std::log(g(u));
}

double DampingLaw::elasticity(double u) const
{
    if (elasticity_) return elasticity_(u);
    // d log g / d log u by central differences in log u.
    const double d = 1e-5;
    const double up = std::min(1.0, u * std::exp(d));
    const double dn = u * std::exp(-d);
    return (log_g(up) - log_g(dn)) / (std::log(up) - std::log(dn));
}

double DampingLaw::g_inverse(double y) const
{
    const double ay = std::abs(y);
    if (ay == 0.0) return 0.0;
    if (ay >= g1_) {
        return sign_of(y) * (1.0 + (ay - g1_));
    }
    const double x = numerics::solve_increasing([this](double s) { return g_(s); }, ay, 0.0, 1.0);
    return sign_of(y) * x;
}

double DampingLaw::rho(double /*x*/, double v) const
{
    if (rho_) return rho_(v);
    return g(v);
}

double DampingLaw::rho_prime(double x, double v) const
{
    if (rho_prime_) return rho_prime_(v);
    if (rho_) {
        const double h = 1e-7 * std::max(1.0, std::abs(v));
        return (rho(x, v + h) - rho(x, v - h)) / (2.0 * h);
    }
    return g_prime(v);
}

nlohmann::json DampingLaw::to_json() const
{
    nlohmann::json j;
    j["family"] = to_string(family_);
    j["params"] = nlohmann::json::object();
    if (family_ == DampingFamily::power) {
        j["params"]["p"] = exponent_;
    }
    j["c1"] = c1_;
    j["c2"] = c2_;
    j["r0"] = r0_;
    return j;
}

DampingLaw make_power_law(double p, double c1, double c2, double r0)
{
    if (!(p > 1.0)) {
        throw ConfigError("power law needs p > 1");
    }
    if (c1 < 0.0 || c2 < 0.0 || (c1 > 0.0 && c2 > 0.0 && c1 > c2)) {
        throw ConfigError("power law: need 0 < c1 <= c2");
    }
    if (r0 < 0.0 || r0 > 1.0) {
        throw ConfigError("power law: need 0 < r0 <= 1");
    }
    DampingLaw::Parts parts;
    parts.family = DampingFamily::power;
    parts.exponent = p;
    parts.g = [p](double x) { return std::pow(x, p); };
    parts.g_prime = [p](double x) { return x == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); };
    parts.log_g = [p](double u) { return p * std::log(u); };
    parts.elasticity = [p](double) { return p; };
    parts.c1 = c1;
    parts.c2 = c2;
    parts.r0 = r0;
    return DampingLaw(std::move(parts));
}

DampingLaw make_cubic_exp(double c1, double c2, double r0)
{
    if (c1 < 0.0 || c2 < 0.0 || (c1 > 0.0 && c2 > 0.0 && c1 > c2)) {
        throw ConfigError("cubic_exp law: need 0 < c1 <= c2");
    }
    if (r0 < 0.0 || r0 > 1.0) {
        throw ConfigError("cubic_exp law: need 0 < r0 <= 1");
    }
    DampingLaw::Parts parts;
    parts.family = DampingFamily::cubic_exp;
    parts.g = [](double x) { return x == 0.0 ? 0.0 : x * x * x * std::exp(-1.0 / (x * x)); };
    parts.g_prime = [](double x) {
        if (x == 0.0) return 0.0;
        return (3.0 * x * x + 2.0) * std::exp(-1.0 / (x * x));
    };
    parts.log_g = [](double u) { return 3.0 * std::log(u) - 1.0 / (u * u); };
    parts.elasticity = [](double u) { return 3.0 + 2.0 / (u * u); };
    parts.c1 = c1;
    parts.c2 = c2;
    parts.r0 = r0;
    return DampingLaw(std::move(parts));
}

DampingLaw make_linear_law()
{
    DampingLaw::Parts parts;
    parts.family = DampingFamily::linear;
    parts.exponent = 1.0;
    parts.g = [](double x) { return x; };
    parts.g_prime = [](double) { return 1.0; };
    parts.log_g = [](double u) { return std::log(u); };
    parts.elasticity = [](double) { return 1.0; };
    parts.rho = [](double v) { return v; };
    parts.rho_prime = [](double) { return 1.0; };
    parts.c1 = 1.0;
    parts.c2 = 1.0;
    parts.r0 = 1.0;
    return DampingLaw(std::move(parts));
}

DampingLaw damping_law_from_json(const nlohmann::json& j)
{
    const auto family = damping_family_from_string(j.at("family").get<std::string>());
    const double c1 = j.value("c1", 0.0);
    const double c2 = j.value("c2", 0.0);
    const double r0 = j.value("r0", 0.0);
    switch (family) {
    case DampingFamily::power: {
        const auto& params = j.at("params");
        return make_power_law(params.at("p").get<double>(), c1, c2, r0);
    }
    case DampingFamily::cubic_exp: return make_cubic_exp(c1, c2, r0);
    case DampingFamily::linear: return make_linear_law();
    case DampingFamily::custom: break;
    }
    throw ConfigError("custom damping laws cannot be read from a description file");
}

bool strictly_convex_R(const std::function<double(double)>& g, double r0)
{
    const int n = 1024;
    const double top = r0 * r0;
    const double step = top / n;
    auto R = [&](double x) {
        const double u = std::sqrt(x);
        return u * g(u);
    };
    double prev = R(0.0);
    double cur = R(step);
    for (int i = 2; i <= n; ++i) {
        const double next = R(i * step);
        if (!std::isfinite(next)) return false;
        if (!(next - 2.0 * cur + prev > 0.0)) return false;
        prev = cur;
        cur = next;
    }
    return true;
}

double default_r0(const std::function<double(double)>& g, int max_halvings)
{
    double r0 = 1.0;
    for (int i = 0; i <= max_halvings; ++i, r0 /= 2.0) {
        if (strictly_convex_R(g, r0)) return r0;
    }
    throw ConfigError("no r0 in {1, 1/2, ...} makes R strictly convex");
}

CoefficientField::CoefficientField(Spec spec) : spec_(std::move(spec)), sup_norm_(0.0)
{
    if (spec_.omega.first > spec_.omega.second || spec_.omega.first < 0.0 || spec_.omega.second > 1.0) {
        throw ConfigError("coefficient field: omega must be a sub-interval of [0,1]");
    }
    if (spec_.kind == CoefficientKind::custom && !spec_.custom) {
        throw ConfigError("coefficient field: custom kind needs a function");
    }
    if (spec_.kind == CoefficientKind::bump && !(spec_.ramp > 0.0)) {
        throw ConfigError("coefficient field: bump ramp must be positive");
    }
    const int n = 8192;
    for (int i = 0; i <= n; ++i) {
        sup_norm_ = std::max(sup_norm_, std::abs((*this)(double(i) / n)));
    }
}

CoefficientField CoefficientField::constant(double value)
{
    Spec s;
    s.kind = CoefficientKind::piecewise_constant;
    s.omega = {0.0, 1.0};
    s.a0 = value;
    s.amax = value;
    return CoefficientField(s);
}

CoefficientField CoefficientField::bump(double lo, double hi, double a0, double amax, double ramp)
{
    Spec s;
    s.kind = CoefficientKind::bump;
    s.omega = {lo, hi};
    s.a0 = a0;
    s.amax = amax;
    s.ramp = ramp;
    return CoefficientField(s);
}

CoefficientField CoefficientField::indicator(double lo, double hi, double value)
{
    Spec s;
    s.kind = CoefficientKind::piecewise_constant;
    s.omega = {lo, hi};
    s.a0 = value;
    s.amax = value;
    return CoefficientField(s);
}

double CoefficientField::operator()(double x) const
{
    const auto [lo, hi] = spec_.omega;
    switch (spec_.kind) {
    case CoefficientKind::piecewise_constant:
        return (x >= lo && x <= hi) ? spec_.amax : 0.0;
    case CoefficientKind::bump: {
        if (x >= lo && x <= hi) return spec_.amax;
        const double d = x < lo ? lo - x : x - hi;
        if (d >= spec_.ramp) return 0.0;
        const double c = std::cos(0.5 * std::numbers::pi * d / spec_.ramp);
        return spec_.amax * c * c;
    }
    case CoefficientKind::custom: return spec_.custom(x);
    }
    return 0.0;
}

nlohmann::json CoefficientField::to_json() const
{
    nlohmann::json j;
    switch (spec_.kind) {
    case CoefficientKind::piecewise_constant: j["kind"] = "piecewise-constant"; break;
    case CoefficientKind::bump: j["kind"] = "bump"; break;
    case CoefficientKind::custom: j["kind"] = "custom"; break;
    }
    j["omega"] = {spec_.omega.first, spec_.omega.second};
    j["a0"] = spec_.a0;
    j["amax"] = spec_.amax;
    if (spec_.kind == CoefficientKind::bump) {
        j["ramp"] = spec_.ramp;
    }
    return j;
}

CoefficientField coefficient_field_from_json(const nlohmann::json& j)
{
    CoefficientField::Spec s;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "piecewise-constant") {
        s.kind = CoefficientKind::piecewise_constant;
    } else if (kind == "bump") {
        s.kind = CoefficientKind::bump;
        s.ramp = j.value("ramp", 0.05);
    } else {
        throw ConfigError("unknown coefficient kind '" + kind + "'");
    }
    const auto& omega = j.at("omega");
    if (!omega.is_array() || omega.size() != 2) {
        throw ConfigError("coefficient omega must be [lower, upper]");
    }
    s.omega = {omega[0].get<double>(), omega[1].get<double>()};
    s.a0 = j.at("a0").get<double>();
    s.amax = j.at("amax").get<double>();
    return CoefficientField(s);
}

nlohmann::json ValidationReport::to_json() const
{
    nlohmann::json j;
    j["passed"] = passed;
    j["violations"] = nlohmann::json::array();
    for (const auto& v : violations) {
        j["violations"].push_back({{"check", v.check}, {"location", v.location}, {"lhs", v.lhs}, {"rhs", v.rhs}});
    }
    j["diagnostics"] = diagnostics;
    return j;
}

ValidationReport validate_A1(const DampingLaw& law, const CoefficientField& field, int samples)
{
    if (samples < 100) {
        throw ConfigError("validate_A1 needs at least 100 samples");
    }
    ValidationReport report;
    auto fail = [&](std::string check, double where, double lhs, double rhs) {
        report.passed = false;
        report.violations.push_back({std::move(check), where, lhs, rhs});
    };
    auto finite_or_flag = [&](double value, const char* what, double where) {
        if (std::isfinite(value)) return true;
        report.passed = false;
        std::ostringstream os;
        os << "non-finite " << what << " at " << where;
        report.diagnostics.push_back(os.str());
        return false;
    };
    const double rel = 1e-12;

    const double g0 = law.g(0.0);
    if (finite_or_flag(g0, "g", 0.0) && g0 != 0.0) {
        fail("g(0)=0", 0.0, g0, 0.0);
    }
    // g'(0) = 0: the difference quotient must be small or still shrinking at tiny h.
    const double slope_fine = law.g(1e-12) / 1e-12;
    const double slope_coarse = law.g(1e-6) / 1e-6;
    if (finite_or_flag(slope_fine, "g", 1e-12) && finite_or_flag(slope_coarse, "g", 1e-6)) {
        if (!(slope_fine <= 0.1 || slope_fine < 0.5 * slope_coarse)) {
            fail("g'(0)=0", 0.0, slope_fine, 0.0);
        }
    }

    double prev_g = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
        const double x = double(i) / samples;
        const double gx = law.g(x);
        if (!finite_or_flag(gx, "g", x)) continue;
        if (law.g(-x) != -gx) {
            fail("g odd", x, law.g(-x), -gx);
        }
        // Strict increase is only checkable where consecutive values are distinguishable.
        if (i > 0 && gx < prev_g) {
            fail("g increasing", x, gx, prev_g);
        }
        if (i > 0 && gx == prev_g && gx != 0.0) {
            fail("g strictly increasing", x, gx, prev_g);
        }
        prev_g = gx;
    }

    const double vmax = 4.0;
    double prev_rho = -std::numeric_limits<double>::infinity();
    const double rho0 = law.rho(0.5, 0.0);
    if (finite_or_flag(rho0, "rho", 0.0) && rho0 != 0.0) {
        fail("rho(x,0)=0", 0.0, rho0, 0.0);
    }
    for (int i = -samples; i <= samples; ++i) {
        const double v = vmax * double(i) / samples;
        const double r = law.rho(0.5, v);
        if (!finite_or_flag(r, "rho", v)) continue;
        if (i > -samples && !(r > prev_rho) && !(r == 0.0 && prev_rho == 0.0)) {
            fail("rho strictly increasing", v, r, prev_rho);
        }
        prev_rho = r;
        const double av = std::abs(v);
        const double ar = std::abs(r);
        if (av <= 1.0) {
            const double lower = law.c1() * law.g(av);
            double upper = 0.0;
            try {
                upper = law.c2() * law.g_inverse(av);
            } catch (const NumericalFailure&) {
                finite_or_flag(NAN, "g inverse", v);
                continue;
            }
            if (ar < lower * (1.0 - rel)) fail("c1 g(|v|) <= |rho|", v, lower, ar);
            if (ar > upper * (1.0 + rel) + 1e-300) fail("|rho| <= c2 g^-1(|v|)", v, ar, upper);
        }
        if (av >= 1.0) {
            const double lower = law.c1() * av;
            const double upper = law.c2() * av;
            if (ar < lower * (1.0 - rel)) fail("c1 |v| <= |rho|", v, lower, ar);
            if (ar > upper * (1.0 + rel)) fail("|rho| <= c2 |v|", v, ar, upper);
        }
    }

    if (!(field.a0() > 0.0)) {
        fail("a0 > 0", 0.0, field.a0(), 0.0);
    }
    const auto [lo, hi] = field.omega();
    double max_jump_coarse = 0.0;
    double max_jump_fine = 0.0;
    double prev_a = field(0.0);
    const int fine = 4 * samples;
    for (int i = 0; i <= fine; ++i) {
        const double x = double(i) / fine;
        const double a = field(x);
        if (!finite_or_flag(a, "a", x)) continue;
        if (a < 0.0) fail("a >= 0", x, a, 0.0);
        if (x >= lo && x <= hi && a < field.a0()) fail("a >= a0 on omega", x, a, field.a0());
        if (i > 0) max_jump_fine = std::max(max_jump_fine, std::abs(a - prev_a) * fine);
        prev_a = a;
    }
    for (int i = 1; i <= samples; ++i) {
        const double x0 = double(i - 1) / samples;
        const double x1 = double(i) / samples;
        max_jump_coarse = std::max(max_jump_coarse, std::abs(field(x1) - field(x0)) * samples);
    }
    // A jump discontinuity shows up as a difference quotient growing with resolution.
    if (max_jump_fine > 2.0 * max_jump_coarse + 1e-12) {
        fail("a continuous", 0.0, max_jump_fine, max_jump_coarse);
    }
    return report;
}

} // namespace decaylab
