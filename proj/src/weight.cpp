#include "decaylab/weight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace decaylab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double json_eta(const nlohmann::json& j)
{
    if (!j.contains("eta") || j.at("eta").is_null()) return kInf;
    return j.at("eta").get<double>();
}

} // namespace

// ---------------------------------------------------------------- WeightSystem

WeightSystem::WeightSystem(DampingLaw law, double beta) : law_(std::move(law)), beta_(beta)
{
    if (!(beta_ > 0.0) || !std::isfinite(beta_)) {
        throw ConfigError("weight: beta must be positive");
    }
    r0sq_ = law_.r0() * law_.r0();
    R_top_ = R(r0sq_).value;
    Rp_top_ = R_prime(r0sq_);
    ell_top_ = ell(r0sq_);
}

Extended WeightSystem::R(double x) const
{
    if (x < 0.0) throw std::domain_error("R: negative argument");
    if (x > r0sq_) return Extended::plus_infinity();
    const double u = std::sqrt(x);
    return {u * law_.g(u), false};
}

double WeightSystem::log_R_prime(double x) const
{
    if (x <= 0.0) return -kInf;
    const double u = std::sqrt(x);
    const double lg = law_.log_g(u);
    if (lg == -kInf) return -kInf;
    const double e = law_.elasticity(u);
    return lg + std::log1p(e) - std::log(2.0 * u);
}

double WeightSystem::R_prime(double x) const
{
    if (x <= 0.0) return 0.0;
    const double u = std::sqrt(x);
    const double gu = law_.g(u);
    const double e = law_.elasticity(u);
    if (gu > 1e-280 && std::isfinite(e)) {
        return gu * (1.0 + e) / (2.0 * u);
    }
    return std::exp(log_R_prime(x));
}

double WeightSystem::ell(double x) const
{
    if (x <= 0.0) return 0.0;
    const double e = law_.elasticity(std::sqrt(x));
    if (!std::isfinite(e)) return x;
    return x * (e - 1.0) / (e + 1.0);
}

double WeightSystem::conjugate_argmax(double y) const
{
    if (y < 0.0) throw std::domain_error("conjugate: negative slope");
    if (y == 0.0) return 0.0;
    if (y >= Rp_top_) return r0sq_;
    return numerics::solve_increasing([this](double x) { return R_prime(x); }, y, kMinX, r0sq_);
}

double WeightSystem::conjugate(double y) const
{
    if (y < 0.0) throw std::domain_error("conjugate: negative slope");
    if (y == 0.0) return 0.0;
    const double x = conjugate_argmax(y);
    const double Rx = (x == r0sq_) ? R_top_ : R(x).value;
    return std::max(0.0, x * y - Rx);
}

double WeightSystem::L(double y) const
{
    if (y < 0.0) throw std::domain_error("L: negative argument");
    if (y == 0.0) return 0.0;
    return conjugate(y) / y;
}

double WeightSystem::maximizer_for_s(double s) const
{
    return numerics::solve_increasing([this](double x) { return ell(x); }, s / beta_, kMinX, r0sq_);
}

double WeightSystem::f(double s) const
{
    if (s < 0.0 || s >= f_domain_sup()) throw std::domain_error("f: argument outside [0, beta r0^2)");
    if (s == 0.0) return 0.0;
    if (s < boundary_s()) return R_prime(maximizer_for_s(s));
    return R_top_ / (r0sq_ - s / beta_);
}

double WeightSystem::log_f(double s) const
{
    if (s < 0.0 || s >= f_domain_sup()) throw std::domain_error("f: argument outside [0, beta r0^2)");
    if (s == 0.0) return -kInf;
    if (s < boundary_s()) return log_R_prime(maximizer_for_s(s));
    return std::log(R_top_) - std::log(r0sq_ - s / beta_);
}

bool WeightSystem::convexity_certificate() const
{
    return strictly_convex_R([this](double u) { return law_.g(u); }, law_.r0());
}

// ---------------------------------------------------------------- GrowthFunction

GrowthFunction GrowthFunction::identity()
{
    GrowthFunction g;
    g.family_ = GrowthFamily::identity;
    return g;
}

GrowthFunction GrowthFunction::constant(double value)
{
    if (!(value > 0.0)) throw ConfigError("constant growth must be positive");
    GrowthFunction g;
    g.family_ = GrowthFamily::constant;
    g.value_ = value;
    return g;
}

GrowthFunction GrowthFunction::power(double exponent)
{
    if (!(exponent > 0.0)) throw ConfigError("power growth needs a positive exponent");
    GrowthFunction g;
    g.family_ = GrowthFamily::power;
    g.exponent_ = exponent;
    return g;
}

GrowthFunction GrowthFunction::exponential(double c, double k)
{
    if (!(c > 0.0) || !(k > 0.0)) throw ConfigError("exponential growth needs c > 0 and k > 0");
    GrowthFunction g;
    g.family_ = GrowthFamily::exponential;
    g.c_ = c;
    g.k_ = k;
    return g;
}

double GrowthFunction::operator()(double x) const
{
    if (x < 0.0) throw std::domain_error("growth: negative argument");
    switch (family_) {
    case GrowthFamily::identity: return x;
    case GrowthFamily::constant: return value_;
    case GrowthFamily::power: return std::pow(x, exponent_);
    case GrowthFamily::exponential: return x == 0.0 ? 0.0 : std::exp(-c_ * std::pow(x, -k_));
    }
    return 0.0;
}

double GrowthFunction::log_value(double x) const
{
    if (x < 0.0) throw std::domain_error("growth: negative argument");
    switch (family_) {
    case GrowthFamily::identity: return std::log(x);
    case GrowthFamily::constant: return std::log(value_);
    case GrowthFamily::power: return exponent_ * std::log(x);
    case GrowthFamily::exponential: return x == 0.0 ? -kInf : -c_ * std::pow(x, -k_);
    }
    return 0.0;
}

double GrowthFunction::inverse(double y) const
{
    if (y < 0.0) throw std::domain_error("growth inverse: negative argument");
    switch (family_) {
    case GrowthFamily::identity: return y;
    case GrowthFamily::constant: throw std::domain_error("constant growth is not invertible");
    case GrowthFamily::power: return std::pow(y, 1.0 / exponent_);
    case GrowthFamily::exponential:
        if (y == 0.0) return 0.0;
        if (y >= 1.0) throw std::domain_error("exponential growth inverse: argument must be < 1");
        return std::pow(c_ / -std::log(y), 1.0 / k_);
    }
    return 0.0;
}

nlohmann::json GrowthFunction::to_json() const
{
    switch (family_) {
    case GrowthFamily::identity: return {{"family", "identity"}};
    case GrowthFamily::constant: return {{"family", "constant"}, {"value", value_}};
    case GrowthFamily::power: return {{"family", "power"}, {"exponent", exponent_}};
    case GrowthFamily::exponential: return {{"family", "exponential"}, {"c", c_}, {"k", k_}};
    }
    return {};
}

GrowthFunction GrowthFunction::from_json(const nlohmann::json& j)
{
    const std::string family = j.value("family", std::string("constant"));
    if (family == "identity") return identity();
    if (family == "constant") return constant(j.value("value", 1.0));
    if (family == "power") return power(j.at("exponent").get<double>());
    if (family == "exponential") {
        const double c = j.value("c", 1.0);
        if (j.contains("beta_obs")) return exponential_obs(c, j.at("beta_obs").get<double>());
        return exponential(c, j.at("k").get<double>());
    }
    throw ConfigError("unknown growth family '" + family + "'");
}

// ---------------------------------------------------------------- GrowthSpec

std::string to_string(GrowthKind kind)
{
    switch (kind) {
    case GrowthKind::G_for_A2: return "G";
    case GrowthKind::H_for_A3: return "H";
    case GrowthKind::identity: return "identity";
    }
    return "G";
}

void GrowthSpec::validate() const
{
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("growth: theta must lie in (0, 1)");
    if (kind == GrowthKind::H_for_A3 && func.family() == GrowthFamily::constant) {
        throw ConfigError("growth: H must be invertible, constant H is not allowed");
    }
}

nlohmann::json GrowthSpec::to_json() const
{
    return {{"kind", to_string(kind)}, {"function", func.to_json()}, {"theta", theta}};
}

GrowthSpec GrowthSpec::from_json(const nlohmann::json& j)
{
    GrowthSpec gs;
    const std::string kind = j.value("kind", std::string("G"));
    if (kind == "G") gs.kind = GrowthKind::G_for_A2;
    else if (kind == "H") gs.kind = GrowthKind::H_for_A3;
    else if (kind == "identity") gs.kind = GrowthKind::identity;
    else throw ConfigError("unknown growth kind '" + kind + "'");
    if (j.contains("function")) gs.func = GrowthFunction::from_json(j.at("function"));
    else if (gs.kind == GrowthKind::identity) gs.func = GrowthFunction::identity();
    gs.theta = j.value("theta", 0.5);
    gs.validate();
    return gs;
}

double growth_G_theta(const GrowthSpec& gs, double x)
{
    gs.validate();
    if (x < 0.0) throw std::domain_error("G_theta: negative argument");
    const double e = 1.0 / gs.theta - 1.0;
    const double xe = std::pow(x, e);
    if (gs.kind == GrowthKind::identity) return xe;
    return gs.func(xe);
}

bool h_over_x_increasing(const GrowthFunction& H, int samples)
{
    double prev = -kInf;
    for (int i = 1; i < samples; ++i) {
        const double x = static_cast<double>(i) / samples;
        const double q = H.log_value(x) - std::log(x);
        if (!(q > prev) && std::isfinite(prev)) return false;
        prev = q;
    }
    return true;
}

// ---------------------------------------------------------------- EnvelopeSpec

void EnvelopeSpec::validate() const
{
    if (!(T > 0.0)) throw ConfigError("envelope: T must be positive");
    if (!(T0 > 0.0)) throw ConfigError("envelope: T0 must be positive");
    if (!(rho_T > 0.0)) throw ConfigError("envelope: rho_T must be positive");
    if (!(r > 0.0)) throw ConfigError("envelope: r must be positive");
    if (!(r < eta)) throw ConfigError("envelope: r must be below eta");
}

nlohmann::json EnvelopeSpec::to_json() const
{
    nlohmann::json j{{"T", T}, {"T0", T0}, {"rho_T", rho_T}, {"r", r}};
    if (std::isfinite(eta)) j["eta"] = eta;
    else j["eta"] = nullptr;
    return j;
}

EnvelopeSpec EnvelopeSpec::from_json(const nlohmann::json& j)
{
    EnvelopeSpec e;
    e.T = j.value("T", e.T);
    e.T0 = j.value("T0", e.T0);
    e.rho_T = j.value("rho_T", e.rho_T);
    e.r = j.value("r", e.r);
    e.eta = json_eta(j);
    e.validate();
    return e;
}

// ---------------------------------------------------------------- composites

WeightComposite::WeightComposite(WeightSystem ws, GrowthSpec gs, CompositeMode mode)
    : ws_(std::move(ws)), gs_(std::move(gs)), mode_(mode)
{
    gs_.validate();
    if (mode_ == CompositeMode::main && gs_.kind == GrowthKind::H_for_A3) {
        throw ConfigError("composite: the main envelope needs growth kind G or identity");
    }
    if (mode_ == CompositeMode::mainbis && gs_.kind == GrowthKind::G_for_A2) {
        throw ConfigError("composite: the mainbis envelope needs growth kind H or identity");
    }
    boundary_s_ = ws_.boundary_s();
    boundary_u_ = interior_log_value(ws_.r0sq());
}

double WeightComposite::log_factor(double s) const
{
    if (s <= 0.0) return -kInf;
    if (mode_ == CompositeMode::main) {
        const double e = 1.0 / gs_.theta - 1.0;
        if (gs_.kind == GrowthKind::identity) return e * std::log(s);
        return gs_.func.log_value(std::pow(s, e));
    }
    if (gs_.kind == GrowthKind::identity) return std::log(s);
    return gs_.func.log_value(s);
}

double WeightComposite::interior_log_value(double x) const
{
    const double lr = ws_.log_R_prime(x);
    if (lr == -kInf) return -kInf;
    return lr + log_factor(ws_.beta() * ws_.ell(x));
}

double WeightComposite::boundary_log_value(double s) const
{
    const double r0sq = ws_.r0sq();
    return std::log(ws_.R_top()) - std::log(r0sq - s / ws_.beta()) + log_factor(s);
}

double WeightComposite::log_value(double s) const
{
    if (s <= 0.0) return -kInf;
    if (s >= domain_sup()) throw std::domain_error("composite: argument outside the weight domain");
    if (s < boundary_s_) return interior_log_value(ws_.maximizer_for_s(s));
    return boundary_log_value(s);
}

double WeightComposite::inverse_log(double u) const
{
    if (u == -kInf) return 0.0;
    if (u <= boundary_u_) {
        const double x = numerics::solve_increasing([this](double x) { return interior_log_value(x); }, u,
                                                    WeightSystem::kMinX, ws_.r0sq());
        return ws_.beta() * ws_.ell(x);
    }
    const double hi = std::nextafter(domain_sup(), 0.0);
    return numerics::solve_increasing([this](double s) { return boundary_log_value(s); }, u, boundary_s_, hi);
}

FunctionComposite::FunctionComposite(Fn F, Fn F_inverse, double domain_sup)
    : F_(std::move(F)), F_inverse_(std::move(F_inverse)), domain_sup_(domain_sup)
{
    if (!F_) throw ConfigError("function composite needs F");
}

double FunctionComposite::log_value(double s) const
{
    if (s <= 0.0) return -kInf;
    return std::log(F_(s));
}

double FunctionComposite::inverse_log(double u) const
{
    if (u == -kInf) return 0.0;
    if (F_inverse_) return F_inverse_(std::exp(u));
    double hi = 1.0;
    auto lv = [this](double s) { return log_value(s); };
    hi = numerics::expand_upper(lv, u, hi, std::min(domain_sup_, std::numeric_limits<double>::max() / 4));
    return numerics::solve_increasing(lv, u, 1e-300, hi);
}

std::shared_ptr<FunctionComposite> FunctionComposite::identity()
{
    return std::make_shared<FunctionComposite>([](double s) { return s; }, [](double v) { return v; });
}

std::shared_ptr<FunctionComposite> FunctionComposite::power(double exponent)
{
    if (!(exponent > 0.0)) throw ConfigError("power composite needs a positive exponent");
    return std::make_shared<FunctionComposite>([exponent](double s) { return std::pow(s, exponent); },
                                               [exponent](double v) { return std::pow(v, 1.0 / exponent); });
}

// ---------------------------------------------------------------- DecayMap

DecayMap::DecayMap(std::shared_ptr<const Composite> h, double r, QuadratureOptions quad)
    : h_(std::move(h)), r_(r), quad_(quad)
{
    if (!h_) throw ConfigError("decay map needs a composite");
    if (!(r_ > 0.0) || !std::isfinite(r_)) throw ConfigError("decay map: r must be positive and finite");
    log_r_ = std::log(r_);
    const double s_r = h_->inverse_log(log_r_);
    const double back = h_->log_value(s_r);
    if (!(s_r > 0.0) || !(std::abs(back - log_r_) <= 1e-9 * std::max(1.0, std::abs(log_r_)))) {
        throw ConfigError("decay map: r lies outside the range of the composite");
    }
    z0_ = 1.0 / s_r;
}

double DecayMap::panel_upper(int j) const { return log_r_ - (std::ldexp(1.0, j) - 1.0); }

numerics::QuadratureResult<double> DecayMap::segment(double a, double b, double abs_tol) const
{
    return numerics::integrate([this](double u) { return integrand(u); }, a, b, abs_tol, quad_.rel_tol);
}

double DecayMap::panel_value(int j) const
{
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = panel_cache_.find(j);
        if (it != panel_cache_.end()) return it->second.first;
    }
    const auto res = segment(panel_upper(j + 1), panel_upper(j), quad_.abs_tol);
    if (!std::isfinite(res.value)) throw NumericalFailure("K_r: non-finite panel integral");
    std::lock_guard<std::mutex> lock(cache_mutex_);
    panel_cache_.emplace(j, std::make_pair(res.value, res.error));
    return res.value;
}

double DecayMap::K_from_panels(double u, double* err) const
{
    double total = 0.0;
    double error = 0.0;
    int j = 0;
    while (panel_upper(j + 1) >= u) {
        total += panel_value(j);
        if (err) {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            error += panel_cache_.at(j).second;
        }
        ++j;
        if (j > 1100) throw NumericalFailure("K_r: argument too small");
    }
    const auto tail = segment(u, panel_upper(j), quad_.abs_tol);
    total += tail.value;
    error += tail.error;
    if (err) *err = error;
    return total;
}

double DecayMap::K_log(double u) const
{
    if (std::isnan(u)) throw std::domain_error("K_r: NaN argument");
    if (u > log_r_ + 1e-12 * std::max(1.0, std::abs(log_r_))) throw std::domain_error("K_r: argument above r");
    if (u >= log_r_) return 0.0;
    if (u == -kInf) return kInf;
    return K_from_panels(u, nullptr);
}

double DecayMap::K(double tau) const
{
    if (!(tau > 0.0)) throw std::domain_error("K_r: argument must be positive");
    return K_log(std::log(tau));
}

numerics::QuadratureResult<double> DecayMap::K_with_error(double tau) const
{
    if (!(tau > 0.0)) throw std::domain_error("K_r: argument must be positive");
    const double u = std::log(tau);
    if (u > log_r_ + 1e-12 * std::max(1.0, std::abs(log_r_))) throw std::domain_error("K_r: argument above r");
    numerics::QuadratureResult<double> out;
    out.converged = true;
    if (u >= log_r_) return out;
    double err = 0.0;
    out.value = K_from_panels(u, &err);
    out.error = err;
    return out;
}

double DecayMap::psi(double z) const
{
    if (!(z >= z0_ * (1.0 - 1e-12))) throw std::domain_error("psi_r: argument below z0");
    const double u = std::min(log_r_, h_->log_value(1.0 / z));
    return z + K_log(u);
}

double DecayMap::psi_inverse(double w) const
{
    if (!(w >= z0_ * (1.0 - 1e-12))) throw std::domain_error("psi_r inverse: argument below psi_r(z0)");
    if (w <= z0_) return z0_;
    // Same panels as psi(), so the inverse is consistent with it.
    return numerics::solve_increasing([this](double z) { return psi(z); }, w, z0_, w, 1e-15);
}

// ---------------------------------------------------------------- Envelope

Envelope::Envelope(std::shared_ptr<const Composite> h, EnvelopeSpec env, double scale, QuadratureOptions quad)
    : env_((env.validate(), env)), scale_(scale), map_(std::move(h), env.r, quad)
{
    threshold_ = env_.T + env_.T0 * map_.z0();
}

EnvelopeValue Envelope::operator()(double t) const
{
    const double w = (t - env_.T) / env_.T0;
    if (!(w >= map_.z0())) return {0.0, false, threshold_};
    const double z = map_.psi_inverse(w);
    return {scale_ * map_.composite().inverse(1.0 / z), true, threshold_};
}

std::shared_ptr<const Composite> make_composite(const WeightSystem& ws, const GrowthSpec& gs, CompositeMode mode)
{
    return std::make_shared<WeightComposite>(ws, gs, mode);
}

Envelope make_main_envelope(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env)
{
    return Envelope(make_composite(ws, gs, CompositeMode::main), env, ws.beta() * env.T);
}

Envelope make_mainbis_envelope(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env)
{
    return Envelope(make_composite(ws, gs, CompositeMode::mainbis), env, ws.beta() * env.T);
}

// ---------------------------------------------------------------- free functions

namespace {

CompositeMode mode_for(const GrowthSpec& gs)
{
    return gs.kind == GrowthKind::H_for_A3 ? CompositeMode::mainbis : CompositeMode::main;
}

DecayMap map_for(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env)
{
    env.validate();
    return DecayMap(make_composite(ws, gs, mode_for(gs)), env.r);
}

} // namespace

double eval_R(const WeightSystem& ws, double x)
{
    const Extended e = ws.R(x);
    return e.infinite ? kInf : e.value;
}

double conjugate_R(const WeightSystem& ws, double y) { return ws.conjugate(y); }
double eval_L(const WeightSystem& ws, double y) { return ws.L(y); }
double weight_f(const WeightSystem& ws, double s) { return ws.f(s); }

double K_r(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double tau)
{
    return map_for(ws, gs, env).K(tau);
}

double psi_r(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double z)
{
    return map_for(ws, gs, env).psi(z);
}

double psi_r_inverse(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double w)
{
    return map_for(ws, gs, env).psi_inverse(w);
}

EnvelopeValue envelope_main(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double t)
{
    return make_main_envelope(ws, gs, env)(t);
}

EnvelopeValue envelope_mainbis(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double t)
{
    return make_mainbis_envelope(ws, gs, env)(t);
}

double envelope_linear_appendix(const GrowthSpec& gs, double t, double c1, double data_norm_sq)
{
    if (t < 0.0) throw std::domain_error("linear envelope: negative time");
    const GrowthFunction H = gs.kind == GrowthKind::identity ? GrowthFunction::identity() : gs.func;
    return c1 * H.inverse(1.0 / (1.0 + t)) * data_norm_sq;
}

std::optional<double> example_closed_form(const DampingLaw& law, const GrowthSpec& gs, double t)
{
    if (t < 0.0) throw std::domain_error("closed form: negative time");
    auto log_factor = [&gs](double x) {
        switch (gs.kind) {
        case GrowthKind::G_for_A2: return std::log(growth_G_theta(gs, x));
        case GrowthKind::H_for_A3: return gs.func.log_value(x);
        case GrowthKind::identity: return std::log(x);
        }
        return 0.0;
    };
    std::function<double(double)> phi;
    if (law.family() == DampingFamily::power) {
        const double p = law.exponent();
        phi = [p, log_factor](double x) { return 0.5 * (p - 1.0) * std::log(x) + log_factor(x); };
    } else if (law.family() == DampingFamily::cubic_exp) {
        phi = [log_factor](double x) { return -1.0 / x + log_factor(x); };
    } else {
        return std::nullopt;
    }
    const double target = -std::log1p(t);
    double hi = numerics::expand_upper(phi, target, 1.0);
    return numerics::solve_increasing(phi, target, 1e-300, hi);
}

double contraction_factor(const GrowthSpec& gs, double Ehat0, double strong_sq, double T, double c_prime, double c8,
                          double beta)
{
    if (!(strong_sq > 0.0) || !(beta > 0.0)) throw std::domain_error("contraction factor: bad arguments");
    double growth = 0.0;
    switch (gs.kind) {
    case GrowthKind::G_for_A2: growth = growth_G_theta(gs, Ehat0); break;
    case GrowthKind::H_for_A3: growth = gs.func(Ehat0); break;
    case GrowthKind::identity: growth = Ehat0; break;
    }
    return c_prime * growth - c8 * T / (beta * strong_sq);
}

BetaChoice choose_beta(const GrowthSpec& gs, double Ehat0, double strong_sq, double T, double c_prime, double c8,
                       int max_doublings)
{
    BetaChoice out;
    for (int d = 0; d <= max_doublings; ++d) {
        out.beta = std::ldexp(1.0, d);
        out.doublings = d;
        out.factor = contraction_factor(gs, Ehat0, strong_sq, T, c_prime, c8, out.beta);
        if (out.factor > 0.0) return out;
    }
    throw NumericalFailure("choose_beta: contraction factor stays non-positive");
}

} // namespace decaylab
