#pragma once

// Observation functional of the conservative flow, the weak observability checks,
// the exponential-observability fit and the explicit-constant lemma checks.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "decaylab/damping.hpp"
#include "decaylab/wavesim.hpp"
#include "decaylab/weight.hpp"

namespace decaylab {

/// Initial datum sum_n (c_n e_n, d_n e_n) given by mode coefficients.
struct Datum {
    std::string label;
    Eigen::VectorXd c;
    Eigen::VectorXd d;

    int max_mode() const;
    Datum scaled(double s) const;
    WaveState state(const Grid& grid) const;
};

Datum single_mode(int n, double c, double d);
/// Modes 1..max_mode as unit-velocity data, then pairwise mixtures over a spread of modes.
std::vector<Datum> deterministic_suite(int max_mode = 32);
/// 1 to 4 active modes with Gaussian coefficients, position part scaled by 1/(n pi).
std::vector<Datum> random_suite(std::uint64_t seed, int count, int max_mode = 32);

struct QuadratureValue {
    double value = 0.0;
    double error = 0.0;
};

/// int_0^T int a |phi_t|^2 from uniformly spaced frames (trapezoid in time and space).
/// The error is the Richardson estimate against every other sample. Throws ConfigError
/// when frames are coarser than 1/40 of the shortest period 2/max_mode.
QuadratureValue observation_functional(const CoefficientField& field, const std::vector<WaveState>& frames, double T,
                                       int max_mode);

/// Conservative trajectory on [0, T] from the exact spectral propagator, sampled
/// `samples_per_period` times per shortest period.
std::vector<WaveState> conservative_trajectory(const Grid& grid, const Datum& datum, double T,
                                               int samples_per_period = 64);

struct ObservationOptions {
    int N = 256;
    int samples_per_period = 64;
};

QuadratureValue observation_functional(const CoefficientField& field, const Datum& datum, double T,
                                       ObservationOptions opt = {});

struct DatumResult {
    int index = 0;
    std::string label;
    double energy = 0.0;
    double strong_sq = 0.0;
    double weak_sq = 0.0;
    double functional = 0.0;
    double functional_error = 0.0;
    double growth_argument = 0.0;
    double growth_value = 0.0;
    /// Largest constant for which this datum satisfies the inequality.
    double admissible = 0.0;
    bool vacuous = false;
    bool passed = true;
};

struct ObservabilityReport {
    std::string check;
    double T = 0.0;
    std::vector<DatumResult> data;
    /// Empirical constant: minimum admissible constant over non-vacuous data.
    double constant = 0.0;
    /// Constant claimed by the configuration; NaN when none was given.
    double claimed = 0.0;
    int worst_index = -1;
    bool passed = true;

    nlohmann::json to_json() const;
    void write_csv(std::ostream& os) const;
};

/// c E G(||datum||^2_weak / E) <= int int a |phi_t|^2 with the weak norm of exponent theta.
ObservabilityReport check_A2(const CoefficientField& field, const GrowthSpec& gs, double T,
                             const std::vector<Datum>& data, double claimed = std::numeric_limits<double>::quiet_NaN(),
                             ObservationOptions opt = {});
/// C ||datum||^2_strong H(E / ||datum||^2_strong) <= int int a |phi_t|^2.
ObservabilityReport check_A3(const CoefficientField& field, const GrowthSpec& gs, double T,
                             const std::vector<Datum>& data, double claimed = std::numeric_limits<double>::quiet_NaN(),
                             ObservationOptions opt = {});

struct ExponentialFit {
    double c_T = 0.0;
    double beta = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
    bool degenerate = false;
    std::vector<double> betas;
    std::vector<double> residuals;
    std::vector<double> slopes;
    std::vector<int> modes;
    std::vector<double> ratios;
    std::vector<double> log_values;

    nlohmann::json to_json() const;
};

/// Least squares of log(functional / strong^2) against b - c ratio^{1/beta} over single modes,
/// with ratio = strong norm / energy norm. Empirical estimate.
ExponentialFit fit_exponential_observability(const CoefficientField& field, double T,
                                             const std::vector<double>& beta_grid, int mode_lo, int mode_hi,
                                             ObservationOptions opt = {});

struct LemmaOptions {
    int N = 128;
    /// dt = dt_factor * h; the check is repeated at dt/2 to estimate time-quadrature error.
    double dt_factor = 0.5;
    /// Added to k_T in the phiz check; nonzero only for mutation self-tests.
    double kT_offset = 0.0;
};

struct LemmaResult {
    std::string lemma;
    std::string label;
    double lhs = 0.0;
    double rhs = 0.0;
    /// Combined discretization error estimate of both sides.
    double tolerance = 0.0;
    bool passed = true;
    bool out_of_domain = false;
    nlohmann::json details;

    double margin() const { return rhs - lhs; }
    nlohmann::json to_json() const;
};

/// int int a |z_t|^2 <= 2 int int (a |w_t|^2 + a |rho(w_t)|^2), z linear damped, w nonlinear damped.
LemmaResult check_lemma_linear_vs_nonlinear(const DampingLaw& law, const CoefficientField& field, const Datum& datum,
                                            double T, LemmaOptions opt = {});
/// int int a |phi_t|^2 <= k_T int int a |z_t|^2 with k_T = 8 T^2 ||a||_inf^2 + 2.
LemmaResult check_lemma_phiz(const CoefficientField& field, const Datum& datum, double T, LemmaOptions opt = {});
/// f(E0hat) int int (a|w_t|^2 + a|rho|^2) <= c5 T R*(f(E0hat)) + c6 (f(E0hat) + 1) int int a rho(w_t) w_t,
/// E0hat = E / ||datum||^2_strong, c5 = |Omega|_a (1 + c2^2), c6 = 1/c1 + c2.
LemmaResult check_lemma_kinetic(const DampingLaw& law, const WeightSystem& ws, const CoefficientField& field,
                                const Datum& datum, double T, LemmaOptions opt = {});

double k_T_constant(const CoefficientField& field, double T);
/// |Omega| = int a dx (trapezoid on 8192 cells).
double weighted_measure(const CoefficientField& field);

} // namespace decaylab
