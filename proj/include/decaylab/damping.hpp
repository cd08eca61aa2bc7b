#pragma once

// Damping nonlinearity g, feedback rho and localization coefficient a(x).

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace decaylab {

enum class DampingFamily { power, cubic_exp, linear, custom };

std::string to_string(DampingFamily family);
DampingFamily damping_family_from_string(const std::string& name);

/// Damping law: g on [0,1] (odd extension implied) and the feedback rho(x, v).
///
/// Immutable once built. Feedback is separable: the position dependence lives in
/// CoefficientField, so rho depends on v only.
class DampingLaw {
public:
    using ScalarFn = std::function<double(double)>;

    struct Parts {
        DampingFamily family = DampingFamily::custom;
        double exponent = 0.0; // p for the power family
        ScalarFn g;            // on [0, 1]
        ScalarFn g_prime;      // optional; finite differences otherwise
        ScalarFn log_g;        // optional; log(g) otherwise
        ScalarFn elasticity;   // optional; u g'(u) / g(u)
        ScalarFn rho;          // optional; default blended feedback otherwise
        ScalarFn rho_prime;    // optional
        double c1 = 0.0;       // <= 0 selects the default sector constants
        double c2 = 0.0;
        double r0 = 0.0;       // <= 0 selects the dyadic default
    };

    explicit DampingLaw(Parts parts);

    DampingFamily family() const { return family_; }
    double exponent() const { return exponent_; }
    double c1() const { return c1_; }
    double c2() const { return c2_; }
    double r0() const { return r0_; }

    /// g on [-1, 1] (odd).
    double g(double x) const;
    double g_prime(double x) const;
    /// log g(u) for u in (0, 1]; -inf at 0.
    double log_g(double u) const;
    /// u g'(u) / g(u) for u in (0, 1].
    double elasticity(double u) const;
    /// Inverse of g on [-g(1), g(1)] by bisection to machine resolution.
    double g_inverse(double y) const;

    /// Feedback rho(x, v). Position is accepted for interface symmetry.
    double rho(double x, double v) const;
    double rho_prime(double x, double v) const;

    nlohmann::json to_json() const;

private:
    DampingFamily family_;
    double exponent_;
    ScalarFn g_;
    ScalarFn g_prime_;
    ScalarFn log_g_;
    ScalarFn elasticity_;
    ScalarFn rho_;
    ScalarFn rho_prime_;
    double g1_;
    double c1_;
    double c2_;
    double r0_;
};

DampingLaw make_power_law(double p, double c1 = 0.0, double c2 = 0.0, double r0 = 0.0);
DampingLaw make_cubic_exp(double c1 = 0.0, double c2 = 0.0, double r0 = 0.0);
/// g(x) = x, rho(v) = v. Violates g'(0) = 0 on purpose; used for linear-damping runs.
DampingLaw make_linear_law();
DampingLaw damping_law_from_json(const nlohmann::json& j);

/// Largest r0 in {1, 1/2, 1/4, ...} for which R(x) = sqrt(x) g(sqrt(x)) has strictly
/// positive second differences on [0, r0^2] with step r0^2/1024.
double default_r0(const std::function<double(double)>& g, int max_halvings = 30);
bool strictly_convex_R(const std::function<double(double)>& g, double r0);

enum class CoefficientKind { piecewise_constant, bump, custom };

/// Localization coefficient a(x) >= 0 on [0,1], with a >= a0 on omega.
class CoefficientField {
public:
    struct Spec {
        CoefficientKind kind = CoefficientKind::piecewise_constant;
        std::pair<double, double> omega{0.0, 1.0};
        double a0 = 1.0;
        double amax = 1.0;
        double ramp = 0.05; // bump only: width of the cosine shoulders outside omega
        std::function<double(double)> custom;
    };

    explicit CoefficientField(Spec spec);

    static CoefficientField constant(double value);
    static CoefficientField zero() { return constant(0.0); }
    static CoefficientField bump(double lo, double hi, double a0, double amax, double ramp = 0.05);
    static CoefficientField indicator(double lo, double hi, double value);

    double operator()(double x) const;
    const Spec& spec() const { return spec_; }
    double a0() const { return spec_.a0; }
    std::pair<double, double> omega() const { return spec_.omega; }
    /// Sampled sup norm on a fine grid.
    double sup_norm() const { return sup_norm_; }
    bool identically_zero() const { return sup_norm_ == 0.0; }

    nlohmann::json to_json() const;

private:
    Spec spec_;
    double sup_norm_;
};

CoefficientField coefficient_field_from_json(const nlohmann::json& j);

struct Violation {
    std::string check;
    double location = 0.0; // v or x, depending on the check
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ValidationReport {
    bool passed = true;
    std::vector<Violation> violations;
    std::vector<std::string> diagnostics;

    nlohmann::json to_json() const;
};

/// Samples the structural assumptions on (g, rho, a): g(0) = g'(0) = 0, oddness,
/// monotonicity, the sector bounds of rho and the bounds on a.
ValidationReport validate_A1(const DampingLaw& law, const CoefficientField& field, int samples = 1000);

} // namespace decaylab
