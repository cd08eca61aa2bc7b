#pragma once

// Optimal-weight convexity objects: R, its convex conjugate, L, the weight f,
// growth compositions, the integral K_r, the map psi_r and the decay envelopes.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "decaylab/damping.hpp"
#include "decaylab/numerics.hpp"

namespace decaylab {

/// Value of an extended-real function: either finite or the +infinity tag.
struct Extended {
    double value = 0.0;
    bool infinite = false;

    static Extended plus_infinity() { return {0.0, true}; }
    bool operator==(const Extended&) const = default;
};

/// R(x) = sqrt(x) g(sqrt(x)) on [0, r0^2] (+infinity elsewhere), R*, L and f.
///
/// Everything is evaluated through the maximizer parametrization: for x in (0, r0^2]
/// the slope y = R'(x) has conjugate R*(y) = x y - R(x) and L(y) = x (e - 1) / (e + 1),
/// where e is the elasticity u g'(u) / g(u) at u = sqrt(x). Slopes beyond R'(r0^2)
/// are handled by the boundary maximizer x = r0^2.
class WeightSystem {
public:
    explicit WeightSystem(DampingLaw law, double beta = 1.0);

    const DampingLaw& law() const { return law_; }
    double beta() const { return beta_; }
    double r0sq() const { return r0sq_; }
    /// Upper end (exclusive) of the domain of f: beta * r0^2.
    double f_domain_sup() const { return beta_ * r0sq_; }

    /// R with the +infinity extension outside [0, r0^2]. Throws std::domain_error for x < 0.
    Extended R(double x) const;
    double R_prime(double x) const;
    double log_R_prime(double x) const;
    /// L(R'(x)) = x - R(x) / R'(x).
    double ell(double x) const;

    /// R*(y) = sup_x { x y - R(x) } for y >= 0.
    double conjugate(double y) const;
    /// The maximizing x in [0, r0^2].
    double conjugate_argmax(double y) const;
    double L(double y) const;
    /// f(s) = L^{-1}(s / beta) on [0, beta r0^2).
    double f(double s) const;
    double log_f(double s) const;

    /// Second differences of R on [0, r0^2] with step r0^2/1024 are all positive.
    bool convexity_certificate() const;

    /// For s / beta < L(R'(r0^2)): the x with beta * ell(x) = s, so that f(s) = R'(x).
    double maximizer_for_s(double s) const;
    /// Weight values with s at or beyond this use the boundary maximizer x = r0^2.
    double boundary_s() const { return beta_ * ell_top_; }
    double R_top() const { return R_top_; }

    // Smallest maximizer considered; R' is treated as 0 below it.
    static constexpr double kMinX = 1e-300;

private:

    DampingLaw law_;
    double beta_;
    double r0sq_;
    double R_top_;
    double Rp_top_;
    double ell_top_;
};

enum class GrowthFamily { identity, constant, power, exponential };

/// Increasing map on (0, inf): identity, constant c, x^a, or exp(-c x^{-k}).
class GrowthFunction {
public:
    GrowthFunction() = default;
    static GrowthFunction identity();
    static GrowthFunction constant(double value = 1.0);
    static GrowthFunction power(double exponent);
    static GrowthFunction exponential(double c, double k);
    /// exp(-c x^{-1/(2 beta_obs)}), the logarithmic-observability growth.
    static GrowthFunction exponential_obs(double c, double beta_obs) { return exponential(c, 1.0 / (2.0 * beta_obs)); }

    GrowthFamily family() const { return family_; }
    double c() const { return c_; }
    double k() const { return k_; }
    double exponent() const { return exponent_; }
    double constant_value() const { return value_; }

    double operator()(double x) const;
    double log_value(double x) const;
    /// Throws std::domain_error when y is outside the range.
    double inverse(double y) const;

    nlohmann::json to_json() const;
    static GrowthFunction from_json(const nlohmann::json& j);
    bool operator==(const GrowthFunction&) const = default;

private:
    GrowthFamily family_ = GrowthFamily::constant;
    double value_ = 1.0;
    double exponent_ = 1.0;
    double c_ = 1.0;
    double k_ = 1.0;
};

enum class GrowthKind { G_for_A2, H_for_A3, identity };

struct GrowthSpec {
    GrowthKind kind = GrowthKind::G_for_A2;
    GrowthFunction func = GrowthFunction::constant();
    double theta = 0.5;

    /// Spectral exponent alpha of the weak space: component one is measured in
    /// H_alpha, component two in H_{alpha - 1/2}. alpha = (theta - 1/2) / theta.
    double weak_norm_exponent() const { return (theta - 0.5) / theta; }
    void validate() const;

    nlohmann::json to_json() const;
    static GrowthSpec from_json(const nlohmann::json& j);
    bool operator==(const GrowthSpec&) const = default;
};

std::string to_string(GrowthKind kind);

/// G_theta(x) = G(x^{1/theta - 1}).
double growth_G_theta(const GrowthSpec& gs, double x);

/// Samples whether x -> H(x)/x is increasing on (0, 1).
bool h_over_x_increasing(const GrowthFunction& H, int samples = 2000);

struct EnvelopeSpec {
    double T = 2.0;
    double T0 = 1.0;
    double rho_T = 1.0;
    double r = 0.5;
    double eta = std::numeric_limits<double>::infinity();

    void validate() const;
    nlohmann::json to_json() const;
    static EnvelopeSpec from_json(const nlohmann::json& j);
    bool operator==(const EnvelopeSpec&) const = default;
};

/// Strictly increasing h: [0, domain_sup) -> [0, range) with h(0) = 0, accessed in log form
/// so that arguments deep in the decay tail do not underflow.
class Composite {
public:
    virtual ~Composite() = default;
    /// log h(s); -inf at s = 0.
    virtual double log_value(double s) const = 0;
    /// s with log h(s) = u.
    virtual double inverse_log(double u) const = 0;
    virtual double domain_sup() const = 0;

    double value(double s) const { return std::exp(log_value(s)); }
    double inverse(double v) const
    {
        if (v <= 0.0) return 0.0;
        return inverse_log(std::log(v));
    }
};

enum class CompositeMode { main, mainbis };

/// f * G_theta (main) or f * H (mainbis). The identity growth kind contributes the factor s.
class WeightComposite final : public Composite {
public:
    WeightComposite(WeightSystem ws, GrowthSpec gs, CompositeMode mode);

    double log_value(double s) const override;
    double inverse_log(double u) const override;
    double domain_sup() const override { return ws_.f_domain_sup(); }

    double log_factor(double s) const;
    const WeightSystem& weight() const { return ws_; }
    const GrowthSpec& growth() const { return gs_; }

private:
    double interior_log_value(double x) const;
    double boundary_log_value(double s) const;

    WeightSystem ws_;
    GrowthSpec gs_;
    CompositeMode mode_;
    double boundary_s_;
    double boundary_u_;
};

/// Composite from a plain increasing function F with F(0) = 0.
class FunctionComposite final : public Composite {
public:
    using Fn = std::function<double(double)>;
    FunctionComposite(Fn F, Fn F_inverse = {}, double domain_sup = std::numeric_limits<double>::infinity());

    double log_value(double s) const override;
    double inverse_log(double u) const override;
    double domain_sup() const override { return domain_sup_; }

    static std::shared_ptr<FunctionComposite> identity();
    static std::shared_ptr<FunctionComposite> power(double exponent);

private:
    Fn F_;
    Fn F_inverse_;
    double domain_sup_;
};

struct QuadratureOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-9;
};

/// K_r(tau) = int_tau^r dv / (v h^{-1}(v)) and psi_r(z) = z + K_r(h(1/z)) for a composite h.
///
/// K_r is integrated in u = log v over fixed panels [log r - (2^{j+1}-1), log r - (2^j - 1)],
/// so values are reproducible no matter which query filled the panel cache.
class DecayMap {
public:
    DecayMap(std::shared_ptr<const Composite> h, double r, QuadratureOptions quad = {});

    double r() const { return r_; }
    double log_r() const { return log_r_; }
    /// Left end of the psi_r domain: 1 / h^{-1}(r).
    double z0() const { return z0_; }
    const Composite& composite() const { return *h_; }

    /// K_r(tau) for 0 < tau <= r. Throws std::domain_error otherwise.
    double K(double tau) const;
    /// K_r(exp(u)) for u <= log r.
    double K_log(double u) const;
    /// K_r(tau) with the summed quadrature error estimate.
    numerics::QuadratureResult<double> K_with_error(double tau) const;

    double psi(double z) const;
    /// Bisection inverse of psi_r. Throws std::domain_error for w < psi_r(z0).
    double psi_inverse(double w) const;

private:
    double integrand(double u) const { return 1.0 / h_->inverse_log(u); }
    double panel_upper(int j) const;
    double panel_value(int j) const;
    numerics::QuadratureResult<double> segment(double a, double b, double abs_tol) const;
    double K_from_panels(double u, double* err) const;

    std::shared_ptr<const Composite> h_;
    double r_;
    double log_r_;
    double z0_;
    QuadratureOptions quad_;
    mutable std::mutex cache_mutex_;
    mutable std::map<int, std::pair<double, double>> panel_cache_;
};

struct EnvelopeValue {
    double value = 0.0;
    bool valid = false;
    /// First time at which the envelope is defined.
    double threshold = 0.0;
};

/// t -> scale * h^{-1}(1 / psi_r^{-1}((t - T) / T0)), valid for (t - T)/T0 >= z0.
class Envelope {
public:
    Envelope(std::shared_ptr<const Composite> h, EnvelopeSpec env, double scale, QuadratureOptions quad = {});

    EnvelopeValue operator()(double t) const;
    double threshold() const { return threshold_; }
    const DecayMap& map() const { return map_; }
    const EnvelopeSpec& spec() const { return env_; }

private:
    EnvelopeSpec env_;
    double scale_;
    DecayMap map_;
    double threshold_;
};

std::shared_ptr<const Composite> make_composite(const WeightSystem& ws, const GrowthSpec& gs, CompositeMode mode);
/// beta T (f G_theta)^{-1}(...) envelope (growth kind G_for_A2 or identity).
Envelope make_main_envelope(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env);
/// beta T (f H)^{-1}(...) envelope (growth kind H_for_A3 or identity).
Envelope make_mainbis_envelope(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env);

double eval_R(const WeightSystem& ws, double x);
double conjugate_R(const WeightSystem& ws, double y);
double eval_L(const WeightSystem& ws, double y);
double weight_f(const WeightSystem& ws, double s);
double K_r(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double tau);
double psi_r(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double z);
double psi_r_inverse(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double w);
EnvelopeValue envelope_main(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double t);
EnvelopeValue envelope_mainbis(const WeightSystem& ws, const GrowthSpec& gs, const EnvelopeSpec& env, double t);

/// C1 H^{-1}(1/(1+t)) times the squared strong norm of the data (linear weak stabilization).
double envelope_linear_appendix(const GrowthSpec& gs, double t, double c1 = 1.0, double data_norm_sq = 1.0);

/// Closed-form decay shapes for the worked damping families:
///   power g = x^p:      (x -> x^{(p-1)/2} G_theta(x))^{-1}(1/(t+1)) or with H in place of G_theta;
///   cubic_exp:          (x -> exp(-1/x) H(x))^{-1}(1/(1+t)).
/// Empty for other families.
std::optional<double> example_closed_form(const DampingLaw& law, const GrowthSpec& gs, double t);

/// Diagnostic of the per-window contraction: C' G_theta(Ehat0) - C8 T / (beta * strong_sq).
double contraction_factor(const GrowthSpec& gs, double Ehat0, double strong_sq, double T, double c_prime, double c8,
                          double beta);

struct BetaChoice {
    double beta = 1.0;
    double factor = 0.0;
    int doublings = 0;
};

/// Starts at beta = 1 and doubles until the contraction factor is positive.
BetaChoice choose_beta(const GrowthSpec& gs, double Ehat0, double strong_sq, double T, double c_prime, double c8,
                       int max_doublings = 80);

} // namespace decaylab
