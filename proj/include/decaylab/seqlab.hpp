#pragma once

// Discrete comparison laboratory: Euler majorants, the comparison ODE and the
// sampled decay bound for sequences obeying a dissipative recurrence.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace decaylab {

/// Recurrence data: E_{k+1} <= E_k - rho_T M(E_k) with M nondecreasing, and the
/// comparison ODE y' = -(rho_T / T) M(y), y(0) = E0.
struct SequenceInstance {
    double E0 = 0.5;
    double rho_T = 0.5;
    double T = 1.0;
    double delta = 1.0;
    std::function<double(double)> M;
    /// Optional F with M(v) = v F^{-1}(v); needed for the K_r characterization and the bound.
    std::function<double(double)> F;
    std::function<double(double)> F_inverse;
    std::string label;

    double T0() const { return T / rho_T; }
    double psi(double x) const { return x - rho_T * M(x); }
    bool has_F() const { return static_cast<bool>(F) && static_cast<bool>(F_inverse); }
    /// Throws ConfigError unless E0 < delta and psi is strictly increasing on sampled [0, delta].
    void validate(int samples = 2000) const;
    nlohmann::json to_json() const;
};

/// M(v) = v F^{-1}(v).
SequenceInstance make_instance_from_F(std::function<double(double)> F, std::function<double(double)> F_inverse,
                                      double E0, double rho_T, double T, double delta, std::string label = "F");
/// M(v) = kappa v^a (a >= 1); F(x) = (x / kappa)^{1/(a-1)} when a > 1.
SequenceInstance make_power_instance(double kappa, double a, double E0, double rho_T, double T, double delta);

/// Last grid point before psi(x) = x - rho_T M(x) first fails to increase on [0, x_max], minus one step.
/// Returns x_max when no decrease is sampled.
double estimate_delta(const std::function<double(double)>& M, double rho_T, double x_max, int samples = 10000);

struct EulerSequence {
    std::vector<double> values;
    /// First index whose value left [0, delta]; -1 when none did.
    int truncated_at = -1;
};

/// y~_0 = E0, y~_{k+1} = y~_k - rho_T M(y~_k) for k < n.
EulerSequence euler_sequence(const SequenceInstance& inst, int n);

/// y(t) by adaptive Dormand-Prince integration (relative tolerance 1e-12).
double ode_solution(const SequenceInstance& inst, double t);
std::vector<double> ode_solution(const SequenceInstance& inst, const std::vector<double>& times);

/// y(t) = K_r^{-1}(t / T0) with r = E0 and K_r(tau) = int_tau^r dv / (v F^{-1}(v)). Empty without F.
std::optional<double> ode_solution_from_K(const SequenceInstance& inst, double t);

struct ChainReport {
    bool premise_ok = true;
    int premise_failure_index = -1;
    bool holds = true;
    int first_violation = -1;
    double min_slack_euler = 0.0; // min_k (y~_k - E_k)
    double min_slack_ode = 0.0;   // min_k (y(kT) - y~_k)
    std::vector<double> slack_euler;
    std::vector<double> slack_ode;

    nlohmann::json to_json(bool with_slacks = true) const;
};

struct ChainTolerances {
    double sequence = 1e-12; // E_k <= y~_k + sequence
    double ode_rel = 1e-9;   // y~_k <= y(kT) (1 + ode_rel) + ode_abs
    double ode_abs = 1e-15;
};

/// Checks E_k <= y~_k <= y(kT) for every index of E.
ChainReport check_chain(const SequenceInstance& inst, const std::vector<double>& E, ChainTolerances tol = {});

struct BoundReport {
    bool premise_ok = true;
    std::string premise_message;
    bool holds = true;
    int violations = 0;
    double max_ratio = 0.0;
    /// Smallest sampled t from which the bound holds at every later sampled time.
    double holds_from = 0.0;
    double threshold = 0.0; // first t at which the bound is defined
    std::vector<double> t;
    std::vector<double> Ehat;
    std::vector<double> bound;
    std::vector<bool> valid;

    nlohmann::json to_json(bool with_samples = true) const;
};

enum class BoundForm {
    /// T F(1 / psi_r^{-1}((t - T) rho_T / T0)), defined for (t - T) rho_T / T0 >= z0.
    stated,
    /// F(1 / psi_r^{-1}((t - T) / T0)), from the critical point of the infimum over theta.
    derived,
};

/// Compares the step function Ehat(t) = Ehat_k on [kT, (k+1)T) with the bound at the given
/// times, with psi_r built from F. Requires r >= Ehat_0.
BoundReport discretcont_bound(const SequenceInstance& inst, const std::vector<double>& Ehat_k,
                              const std::vector<double>& times, double r, BoundForm form = BoundForm::stated);

/// Random power instances kappa v^a with a in [1, 3], delta = 1 and rho_T M'(delta) < 1.
SequenceInstance random_instance(std::mt19937_64& rng);

/// Sequence obeying the recurrence: equality without `rng`, otherwise each step also
/// removes a random fraction of what the equality step leaves.
std::vector<double> recurrence_sequence(const SequenceInstance& inst, int n, std::mt19937_64* rng = nullptr);

} // namespace decaylab
