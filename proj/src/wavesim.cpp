#include "decaylab/wavesim.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

#include "decaylab/numerics.hpp"

namespace decaylab {

std::string to_string(WaveKind kind)
{
    switch (kind) {
    case WaveKind::conservative: return "conservative";
    case WaveKind::linear_damped: return "linear_damped";
    case WaveKind::nonlinear_damped: return "nonlinear_damped";
    }
    return "conservative";
}

std::string to_string(WaveScheme scheme) { return scheme == WaveScheme::spectral ? "spectral" : "leapfrog"; }

WaveKind wave_kind_from_string(const std::string& name)
{
    if (name == "conservative") return WaveKind::conservative;
    if (name == "linear_damped") return WaveKind::linear_damped;
    if (name == "nonlinear_damped") return WaveKind::nonlinear_damped;
    throw ConfigError("unknown wave kind '" + name + "'");
}

WaveScheme wave_scheme_from_string(const std::string& name)
{
    if (name == "leapfrog") return WaveScheme::leapfrog;
    if (name == "spectral") return WaveScheme::spectral;
    throw ConfigError("unknown scheme '" + name + "'");
}

WaveState state_from_modes(const Grid& grid, const Eigen::VectorXd& c, const Eigen::VectorXd& d, double t)
{
    WaveState s;
    s.t = t;
    s.w = grid.from_modes(c);
    s.v = grid.from_modes(d);
    return s;
}

void WaveConfig::validate() const
{
    if (N < 1) throw ConfigError("simulation: N must be positive");
    if (!(T_final >= 0.0)) throw ConfigError("simulation: T_final must be nonnegative");
    if (stride < 1) throw ConfigError("simulation: stride must be positive");
    if (modes > N) throw ConfigError("simulation: modes must not exceed N");
    if (max_retries < 0) throw ConfigError("simulation: max_retries must be nonnegative");
    const double step = effective_dt();
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("simulation: dt must be positive");
    if (scheme == WaveScheme::leapfrog && step * (N + 1) > 1.0 + 1e-12) {
        throw ConfigError("simulation: CFL violated, need dt (N+1) <= 1");
    }
    if (scheme == WaveScheme::spectral && kind != WaveKind::conservative && !field.identically_zero()) {
        throw ConfigError("simulation: the spectral propagator is only available without damping");
    }
}

nlohmann::json WaveConfig::to_json() const
{
    nlohmann::json j{{"N", N},
                     {"dt", effective_dt()},
                     {"T_final", T_final},
                     {"scheme", to_string(scheme)},
                     {"modes", effective_modes()},
                     {"kind", to_string(kind)},
                     {"law", law.to_json()},
                     {"coefficient", field.to_json()},
                     {"stride", stride}};
    if (std::isfinite(weak_alpha)) j["weak_alpha"] = weak_alpha;
    return j;
}

namespace {

int step_count(double T_final, double dt) { return static_cast<int>(std::ceil(T_final / dt - 1e-9)); }

WaveRun solve_spectral(const WaveConfig& cfg, const WaveState& init)
{
    const Grid grid(cfg.N);
    const int M = cfg.effective_modes();
    const Eigen::VectorXd c0 = grid.to_modes(init.w).head(M);
    const Eigen::VectorXd d0 = grid.to_modes(init.v).head(M);
    const double dt = cfg.effective_dt();
    const int n_steps = step_count(cfg.T_final, dt);
    WaveRun run;
    run.dt = dt;
    run.stride = cfg.stride;
    Eigen::VectorXd c(M), d(M);
    for (int n = 0; n <= n_steps; ++n) {
        if (n % cfg.stride != 0 && n != n_steps) continue;
        const double t = n * dt;
        double E = 0.0, strong = 0.0, weak = 0.0;
        for (int m = 0; m < M; ++m) {
            const double lam = Grid::lambda(m + 1);
            const double om = std::sqrt(lam);
            const double cs = std::cos(om * t), sn = std::sin(om * t);
            c[m] = c0[m] * cs + d0[m] / om * sn;
            d[m] = -c0[m] * om * sn + d0[m] * cs;
            E += lam * c[m] * c[m] + d[m] * d[m];
            strong += lam * lam * c[m] * c[m] + lam * d[m] * d[m];
            if (std::isfinite(cfg.weak_alpha)) {
                weak += std::pow(lam, 2.0 * cfg.weak_alpha) * c[m] * c[m] +
                        std::pow(lam, 2.0 * cfg.weak_alpha - 1.0) * d[m] * d[m];
            }
        }
        auto& tr = run.trace;
        tr.t.push_back(init.t + t);
        tr.energy.push_back(0.5 * E);
        tr.staggered_energy.push_back(0.5 * E);
        tr.dissipation.push_back(0.0);
        tr.a_v_sq.push_back(0.0);
        tr.a_rho_sq.push_back(0.0);
        tr.strong_norm.push_back(std::sqrt(strong));
        tr.weak_norm.push_back(std::isfinite(cfg.weak_alpha) ? std::sqrt(weak)
                                                             : std::numeric_limits<double>::quiet_NaN());
        if (cfg.keep_frames) run.frames.push_back(state_from_modes(grid, c, d, init.t + t));
    }
    return run;
}

WaveRun solve_leapfrog(const WaveConfig& cfg, const WaveState& init, double dt, int stride)
{
    const Grid grid(cfg.N);
    const int N = cfg.N;
    const double h = grid.h();
    const int n_steps = step_count(cfg.T_final, dt);
    const bool damped = cfg.kind != WaveKind::conservative;
    const bool linear = cfg.kind == WaveKind::linear_damped;

    // `a` weights the recorded integrals; the damping term only acts in damped runs.
    Eigen::VectorXd a(N);
    for (int j = 0; j < N; ++j) a[j] = cfg.field(grid.x(j));
    const Eigen::VectorXd a_damp = damped ? a : Eigen::VectorXd::Zero(N);
    auto rho = [&](int j, double v) { return linear ? v : cfg.law.rho(grid.x(j), v); };
    auto rho_prime = [&](int j, double v) { return linear ? 1.0 : cfg.law.rho_prime(grid.x(j), v); };

    WaveRun run;
    run.dt = dt;
    run.stride = stride;
    const bool want_weak = std::isfinite(cfg.weak_alpha);

    Eigen::VectorXd w_prev = init.w; // w^{n-1}
    Eigen::VectorXd w = init.w;      // w^n
    Eigen::VectorXd v = init.v;      // v^n
    Eigen::VectorXd w_next(N);
    Eigen::VectorXd rv(N);
    double D = 0.0, AV = 0.0, AR = 0.0;
    double rate_prev = 0.0, av_prev = 0.0, ar_prev = 0.0;

    for (int n = 0; n <= n_steps; ++n) {
        const Eigen::VectorXd Kw = grid.apply_K(w);
        if (n > 0) {
            for (int j = 0; j < N; ++j) {
                const double b = (w[j] - w_prev[j]) / dt - 0.5 * dt * Kw[j];
                const double c = 0.5 * dt * a_damp[j];
                if (c == 0.0) {
                    v[j] = b;
                } else if (linear) {
                    v[j] = b / (1.0 + c);
                } else {
                    auto phi = [&](double x) { return x + c * rho(j, x) - b; };
                    auto dphi = [&](double x) { return 1.0 + c * rho_prime(j, x); };
                    v[j] = numerics::safeguarded_newton(phi, dphi, std::min(0.0, b), std::max(0.0, b), cfg.solve_tol);
                }
            }
        }
        double rate = 0.0, av = 0.0, ar = 0.0;
        for (int j = 0; j < N; ++j) {
            rv[j] = a_damp[j] == 0.0 ? 0.0 : rho(j, v[j]);
            rate += a_damp[j] * rv[j] * v[j];
            av += a[j] * v[j] * v[j];
            ar += a_damp[j] * rv[j] * rv[j];
        }
        rate *= h;
        av *= h;
        ar *= h;
        if (!std::isfinite(rate)) throw NumericalFailure("leapfrog: non-finite dissipation");
        if (n > 0) {
            D += 0.5 * dt * (rate_prev + rate);
            AV += 0.5 * dt * (av_prev + av);
            AR += 0.5 * dt * (ar_prev + ar);
        }
        rate_prev = rate;
        av_prev = av;
        ar_prev = ar;

        if (n == 0) {
            w_next = w + dt * v - 0.5 * dt * dt * (Kw + a_damp.cwiseProduct(rv));
        } else {
            w_next = w_prev + 2.0 * dt * v;
        }

        if (n % stride == 0 || n == n_steps) {
            auto& tr = run.trace;
            tr.t.push_back(init.t + n * dt);
            tr.energy.push_back(0.5 * (h * v.squaredNorm() + grid.stiffness(w, w)));
            const Eigen::VectorXd dw = (w_next - w) / dt;
            tr.staggered_energy.push_back(0.5 * (h * dw.squaredNorm() + grid.stiffness(w_next, w)));
            tr.dissipation.push_back(D);
            tr.a_v_sq.push_back(AV);
            tr.a_rho_sq.push_back(AR);
            tr.strong_norm.push_back(std::sqrt(h * Kw.squaredNorm() + grid.stiffness(v, v)));
            if (want_weak) {
                const Eigen::VectorXd c = grid.to_modes(w);
                const Eigen::VectorXd d = grid.to_modes(v);
                double s = 0.0;
                for (int m = 0; m < N; ++m) {
                    const double lam = grid.lambda_discrete(m + 1);
                    s += std::pow(lam, 2.0 * cfg.weak_alpha) * c[m] * c[m] +
                         std::pow(lam, 2.0 * cfg.weak_alpha - 1.0) * d[m] * d[m];
                }
                tr.weak_norm.push_back(std::sqrt(s));
            } else {
                tr.weak_norm.push_back(std::numeric_limits<double>::quiet_NaN());
            }
            if (cfg.keep_frames) run.frames.push_back({init.t + n * dt, w, v});
        }
        w_prev = w;
        w = w_next;
    }
    return run;
}

} // namespace

WaveRun solve(const WaveConfig& config, const WaveState& initial)
{
    config.validate();
    if (initial.w.size() != config.N || initial.v.size() != config.N) {
        throw ConfigError("initial state does not match the grid size");
    }
    if (config.scheme == WaveScheme::spectral) return solve_spectral(config, initial);
    double dt = config.effective_dt();
    int stride = config.stride;
    for (int attempt = 0;; ++attempt) {
        try {
            WaveRun run = solve_leapfrog(config, initial, dt, stride);
            run.retries = attempt;
            return run;
        } catch (const NumericalFailure& e) {
            if (attempt >= config.max_retries) {
                char buf[160];
                std::snprintf(buf, sizeof buf, " (after %d step halvings, dt = %.3g)", attempt, dt);
                throw NumericalFailure(std::string(e.what()) + buf);
            }
            dt *= 0.5;
            stride *= 2;
        }
    }
}

namespace {

struct ModeSums {
    Eigen::VectorXd c, d;
};

ModeSums modes_of(const Grid& grid, const WaveState& s)
{
    if (s.w.size() != grid.N() || s.v.size() != grid.N()) throw ConfigError("state does not match the grid size");
    return {grid.to_modes(s.w), grid.to_modes(s.v)};
}

} // namespace

double energy(const Grid& grid, const WaveState& state)
{
    const auto m = modes_of(grid, state);
    double e = 0.0;
    for (int n = 0; n < grid.N(); ++n) e += Grid::lambda(n + 1) * m.c[n] * m.c[n] + m.d[n] * m.d[n];
    return 0.5 * e;
}

double strong_norm(const Grid& grid, const WaveState& state)
{
    const auto m = modes_of(grid, state);
    double e = 0.0;
    for (int n = 0; n < grid.N(); ++n) {
        const double lam = Grid::lambda(n + 1);
        e += lam * lam * m.c[n] * m.c[n] + lam * m.d[n] * m.d[n];
    }
    return std::sqrt(e);
}

double weak_norm(const Grid& grid, const WaveState& state, double alpha)
{
    const auto m = modes_of(grid, state);
    double e = 0.0;
    for (int n = 0; n < grid.N(); ++n) {
        const double lam = Grid::lambda(n + 1);
        e += std::pow(lam, 2.0 * alpha) * m.c[n] * m.c[n] + std::pow(lam, 2.0 * alpha - 1.0) * m.d[n] * m.d[n];
    }
    return std::sqrt(e);
}

double weak_norm(const Grid& grid, const WaveState& state, const GrowthSpec& gs)
{
    gs.validate();
    return weak_norm(grid, state, gs.weak_norm_exponent());
}

double energy_identity_residual(const EnergyTrace& trace)
{
    if (trace.size() == 0) return 0.0;
    const double E0 = trace.energy.front();
    if (!(E0 > 0.0)) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        worst = std::max(worst, std::abs((E0 - trace.energy[i]) - trace.dissipation[i]) / E0);
    }
    return worst;
}

void write_trace_csv(std::ostream& os, const EnergyTrace& trace)
{
    os << "t,E,D,strong_norm,weak_norm\n";
    char buf[160];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", trace.t[i], trace.energy[i],
                      trace.dissipation[i], trace.strong_norm[i], trace.weak_norm[i]);
        os << buf;
    }
}

namespace {

template <typename T>
void put_le(std::ostream& os, T value)
{
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& value)
{
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
    return true;
}

} // namespace

void write_snapshots(const std::string& path, const WaveRun& run)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    const std::uint64_t N = run.frames.empty() ? 0 : static_cast<std::uint64_t>(run.frames.front().w.size());
    put_le<std::uint64_t>(os, N);
    put_le<double>(os, run.dt);
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(run.stride));
    for (const auto& f : run.frames) {
        put_le<double>(os, f.t);
        for (Eigen::Index j = 0; j < f.w.size(); ++j) put_le<double>(os, f.w[j]);
        for (Eigen::Index j = 0; j < f.v.size(); ++j) put_le<double>(os, f.v[j]);
    }
}

SnapshotFile read_snapshots(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    SnapshotFile out;
    if (!get_le(is, out.N) || !get_le(is, out.dt) || !get_le(is, out.stride)) {
        throw std::runtime_error("truncated snapshot header in " + path);
    }
    const auto N = static_cast<Eigen::Index>(out.N);
    for (;;) {
        WaveState s;
        if (!get_le(is, s.t)) break;
        s.w.resize(N);
        s.v.resize(N);
        for (Eigen::Index j = 0; j < N; ++j) {
            if (!get_le(is, s.w[j])) throw std::runtime_error("truncated snapshot frame in " + path);
        }
        for (Eigen::Index j = 0; j < N; ++j) {
            if (!get_le(is, s.v[j])) throw std::runtime_error("truncated snapshot frame in " + path);
        }
        out.frames.push_back(std::move(s));
    }
    return out;
}

} // namespace decaylab
