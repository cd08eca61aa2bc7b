#pragma once

// 1D wave equation on (0, 1) with Dirichlet conditions: conservative, linearly
// damped and nonlinearly damped flows, with energy and dissipation traces.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "decaylab/damping.hpp"
#include "decaylab/weight.hpp"

namespace decaylab {

enum class WaveKind { conservative, linear_damped, nonlinear_damped };
enum class WaveScheme { leapfrog, spectral };

std::string to_string(WaveKind kind);
std::string to_string(WaveScheme scheme);
WaveKind wave_kind_from_string(const std::string& name);
WaveScheme wave_scheme_from_string(const std::string& name);

/// Uniform grid x_j = j h, j = 1..N, h = 1/(N+1), with the sine eigenbasis
/// e_n(x) = sqrt(2) sin(n pi x) sampled at the nodes.
template <typename Scalar>
class SineGrid {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    explicit SineGrid(int N) : N_(N), h_(Scalar(1) / Scalar(N + 1))
    {
        if (N < 1) throw ConfigError("grid needs at least one interior node");
    }

    int N() const { return N_; }
    Scalar h() const { return h_; }
    Scalar x(int j) const { return Scalar(j + 1) * h_; }

    /// N x N matrix of e_n(x_j); built on first use.
    const Matrix& basis() const
    {
        if (basis_.rows() != N_) {
            basis_.resize(N_, N_);
            const Scalar pi = std::numbers::pi_v<Scalar>;
            for (int n = 0; n < N_; ++n) {
                for (int j = 0; j < N_; ++j) {
                    basis_(j, n) = std::sqrt(Scalar(2)) * std::sin(Scalar(n + 1) * pi * x(j));
                }
            }
        }
        return basis_;
    }

    /// Continuous eigenvalue (n pi)^2 of A, n >= 1.
    static Scalar lambda(int n) { return Scalar(n) * Scalar(n) * std::numbers::pi_v<Scalar> * std::numbers::pi_v<Scalar>; }
    /// Eigenvalue of the three-point Laplacian: 4 (N+1)^2 sin^2(n pi / (2(N+1))).
    Scalar lambda_discrete(int n) const
    {
        const Scalar s = std::sin(Scalar(n) * std::numbers::pi_v<Scalar> / Scalar(2 * (N_ + 1)));
        return Scalar(4) * Scalar(N_ + 1) * Scalar(N_ + 1) * s * s;
    }

    /// Coefficients c_n = h sum_j w_j e_n(x_j); exact for the first N modes.
    Vector to_modes(const Vector& w) const { return h_ * basis().transpose() * w; }
    /// Nodal samples of sum_n c_n e_n.
    Vector from_modes(const Vector& c) const
    {
        if (c.size() > N_) throw ConfigError("more modes than grid nodes");
        return basis().leftCols(c.size()) * c;
    }

    /// Three-point -d^2/dx^2 with zero boundary values.
    Vector apply_K(const Vector& w) const
    {
        Vector out(N_);
        const Scalar inv = Scalar(1) / (h_ * h_);
        for (int j = 0; j < N_; ++j) {
            const Scalar left = j > 0 ? w[j - 1] : Scalar(0);
            const Scalar right = j + 1 < N_ ? w[j + 1] : Scalar(0);
            out[j] = (Scalar(2) * w[j] - left - right) * inv;
        }
        return out;
    }

    /// h w^T K u.
    Scalar stiffness(const Vector& w, const Vector& u) const
    {
        Scalar s = 0;
        for (int j = 0; j <= N_; ++j) {
            const Scalar dw = (j < N_ ? w[j] : Scalar(0)) - (j > 0 ? w[j - 1] : Scalar(0));
            const Scalar du = (j < N_ ? u[j] : Scalar(0)) - (j > 0 ? u[j - 1] : Scalar(0));
            s += dw * du;
        }
        return s / h_;
    }

private:
    int N_;
    Scalar h_;
    mutable Matrix basis_;
};

using Grid = SineGrid<double>;

struct WaveState {
    double t = 0.0;
    Eigen::VectorXd w; // interior nodes; boundary values are zero
    Eigen::VectorXd v;
};

/// State sum_n (c_n e_n, d_n e_n) sampled on the grid.
WaveState state_from_modes(const Grid& grid, const Eigen::VectorXd& c, const Eigen::VectorXd& d, double t = 0.0);

struct WaveConfig {
    int N = 128;
    /// <= 0 selects dt = 0.5 h.
    double dt = 0.0;
    double T_final = 1.0;
    WaveScheme scheme = WaveScheme::leapfrog;
    /// Spectral modes kept; <= 0 keeps N.
    int modes = 0;
    WaveKind kind = WaveKind::nonlinear_damped;
    DampingLaw law = make_linear_law();
    CoefficientField field = CoefficientField::zero();
    /// Frames and trace samples every `stride` steps.
    int stride = 1;
    /// Exponent of the weak norm recorded in the trace; NaN records none.
    double weak_alpha = std::numeric_limits<double>::quiet_NaN();
    int max_retries = 3;
    double solve_tol = 1e-15;
    bool keep_frames = true;

    double effective_dt() const { return dt > 0.0 ? dt : 0.5 / (N + 1); }
    int effective_modes() const { return modes > 0 ? modes : N; }
    /// Throws ConfigError on CFL violation (dt (N+1) > 1 for leapfrog) or inconsistent settings.
    void validate() const;
    nlohmann::json to_json() const;
};

/// Samples of the run at the trace stride. Leapfrog energies use the discrete Laplacian,
/// spectral energies the continuous eigenvalues.
struct EnergyTrace {
    std::vector<double> t;
    /// E at level t: 1/2 (|v|^2 + <K w, w>) with the centered velocity.
    std::vector<double> energy;
    /// Staggered energy at t + dt/2: 1/2 (|(w^{n+1} - w^n)/dt|^2 + <K w^{n+1}, w^n>). Exactly
    /// nonincreasing for damped leapfrog runs.
    std::vector<double> staggered_energy;
    /// Cumulative int_0^t int a rho(v) v (trapezoid in time).
    std::vector<double> dissipation;
    /// Cumulative int_0^t int a |v|^2 and int_0^t int a |rho(v)|^2. Leapfrog runs record the
    /// first with the configured coefficient even when it does not damp (conservative kind);
    /// spectral runs record zeros.
    std::vector<double> a_v_sq;
    std::vector<double> a_rho_sq;
    std::vector<double> strong_norm;
    std::vector<double> weak_norm;

    std::size_t size() const { return t.size(); }
};

struct WaveRun {
    std::vector<WaveState> frames;
    EnergyTrace trace;
    double dt = 0.0;
    int stride = 1;
    int retries = 0;
};

WaveRun solve(const WaveConfig& config, const WaveState& initial);

/// 1/2 (||w||_{1/2}^2 + ||v||^2) from spectral sums with lambda_n = (n pi)^2.
double energy(const Grid& grid, const WaveState& state);
/// ||(w, v)||_{H_1 x H_{1/2}} = sqrt(sum lambda^2 w_n^2 + lambda v_n^2).
double strong_norm(const Grid& grid, const WaveState& state);
/// sqrt(sum lambda^{2 alpha} w_n^2 + lambda^{2 alpha - 1} v_n^2).
double weak_norm(const Grid& grid, const WaveState& state, double alpha);
double weak_norm(const Grid& grid, const WaveState& state, const GrowthSpec& gs);

/// max_i |(E(0) - E(t_i)) - D(t_i)| / E(0).
double energy_identity_residual(const EnergyTrace& trace);

void write_trace_csv(std::ostream& os, const EnergyTrace& trace);

/// Little-endian layout: u64 N, f64 dt, u64 stride, then per frame f64 t, N x f64 w, N x f64 v.
void write_snapshots(const std::string& path, const WaveRun& run);
struct SnapshotFile {
    std::uint64_t N = 0;
    double dt = 0.0;
    std::uint64_t stride = 1;
    std::vector<WaveState> frames;
};
SnapshotFile read_snapshots(const std::string& path);

} // namespace decaylab
