#include "decaylab/seqlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "decaylab/numerics.hpp"
#include "decaylab/weight.hpp"

namespace decaylab {

void SequenceInstance::validate(int samples) const
{
    if (!M) throw ConfigError("sequence instance needs M");
    if (!(rho_T > 0.0) || !(T > 0.0)) throw ConfigError("sequence instance: rho_T and T must be positive");
    if (!(E0 >= 0.0) || !(E0 < delta)) throw ConfigError("sequence instance: need 0 <= E0 < delta");
    double prev = psi(0.0);
    for (int i = 1; i <= samples; ++i) {
        const double x = delta * i / samples;
        const double p = psi(x);
        if (!(p > prev)) throw ConfigError("sequence instance: x - rho_T M(x) is not increasing on [0, delta]");
        prev = p;
    }
}

nlohmann::json SequenceInstance::to_json() const
{
    return {{"label", label}, {"E0", E0}, {"rho_T", rho_T}, {"T", T}, {"T0", T0()}, {"delta", delta}};
}

SequenceInstance make_instance_from_F(std::function<double(double)> F, std::function<double(double)> F_inverse,
                                      double E0, double rho_T, double T, double delta, std::string label)
{
    if (!F || !F_inverse) throw ConfigError("sequence instance: F and its inverse are required");
    SequenceInstance inst;
    inst.E0 = E0;
    inst.rho_T = rho_T;
    inst.T = T;
    inst.delta = delta;
    inst.M = [Fi = F_inverse](double v) { return v * Fi(v); };
    inst.F = std::move(F);
    inst.F_inverse = std::move(F_inverse);
    inst.label = std::move(label);
    return inst;
}

SequenceInstance make_power_instance(double kappa, double a, double E0, double rho_T, double T, double delta)
{
    if (!(kappa > 0.0) || !(a >= 1.0)) throw ConfigError("power instance needs kappa > 0 and a >= 1");
    SequenceInstance inst;
    inst.E0 = E0;
    inst.rho_T = rho_T;
    inst.T = T;
    inst.delta = delta;
    inst.M = [kappa, a](double v) { return kappa * std::pow(v, a); };
    if (a > 1.0) {
        inst.F = [kappa, a](double x) { return std::pow(x / kappa, 1.0 / (a - 1.0)); };
        inst.F_inverse = [kappa, a](double v) { return kappa * std::pow(v, a - 1.0); };
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g v^%.17g", kappa, a);
    inst.label = buf;
    return inst;
}

double estimate_delta(const std::function<double(double)>& M, double rho_T, double x_max, int samples)
{
    if (!(x_max > 0.0) || samples < 2) throw ConfigError("estimate_delta: need x_max > 0 and samples >= 2");
    const double step = x_max / samples;
    double prev = 0.0 - rho_T * M(0.0);
    for (int i = 1; i <= samples; ++i) {
        const double x = step * i;
        const double p = x - rho_T * M(x);
        if (!(p > prev)) return std::max(0.0, x - 2.0 * step);
        prev = p;
    }
    return x_max;
}

EulerSequence euler_sequence(const SequenceInstance& inst, int n)
{
    if (n < 0) throw ConfigError("euler_sequence: negative length");
    EulerSequence out;
    out.values.reserve(n + 1);
    double y = inst.E0;
    out.values.push_back(y);
    for (int k = 0; k < n; ++k) {
        y = y - inst.rho_T * inst.M(y);
        out.values.push_back(y);
        if (out.truncated_at < 0 && (y < 0.0 || y > inst.delta)) out.truncated_at = k + 1;
    }
    return out;
}

std::vector<double> ode_solution(const SequenceInstance& inst, const std::vector<double>& times)
{
    const double c = inst.rho_T / inst.T;
    return numerics::dopri5([&](double y) { return -c * inst.M(std::max(y, 0.0)); }, inst.E0, times, 1e-12, 1e-300);
}

double ode_solution(const SequenceInstance& inst, double t)
{
    if (t < 0.0) throw std::domain_error("ode_solution: negative time");
    return ode_solution(inst, std::vector<double>{t}).front();
}

std::optional<double> ode_solution_from_K(const SequenceInstance& inst, double t)
{
    if (!inst.has_F()) return std::nullopt;
    if (t < 0.0) throw std::domain_error("ode_solution_from_K: negative time");
    if (t == 0.0 || inst.E0 == 0.0) return inst.E0;
    const DecayMap map(std::make_shared<FunctionComposite>(inst.F, inst.F_inverse), inst.E0);
    const double target = t / inst.T0();
    // K_r(e^u) decreases in u; bracket the solution below log r.
    double width = 1.0;
    while (map.K_log(map.log_r() - width) < target) {
        width *= 2.0;
        if (width > 1e6) throw NumericalFailure("ode_solution_from_K: K_r does not reach the target");
    }
    const double u = numerics::solve_increasing([&](double v) { return -map.K_log(v); }, -target,
                                                map.log_r() - width, map.log_r());
    return std::exp(u);
}

nlohmann::json ChainReport::to_json(bool with_slacks) const
{
    nlohmann::json j{{"premise_ok", premise_ok},
                     {"premise_failure_index", premise_failure_index},
                     {"holds", holds},
                     {"first_violation", first_violation},
                     {"min_slack_euler", min_slack_euler},
                     {"min_slack_ode", min_slack_ode}};
    if (with_slacks) {
        j["slack_euler"] = slack_euler;
        j["slack_ode"] = slack_ode;
    }
    return j;
}

ChainReport check_chain(const SequenceInstance& inst, const std::vector<double>& E, ChainTolerances tol)
{
    ChainReport rep;
    if (E.empty()) return rep;
    if (!(E.front() < inst.delta)) {
        rep.premise_ok = false;
        rep.premise_failure_index = 0;
    }
    for (std::size_t k = 0; rep.premise_ok && k + 1 < E.size(); ++k) {
        const double allowed = E[k] - inst.rho_T * inst.M(E[k]);
        if (E[k + 1] > allowed + 1e-14 * std::abs(E[k])) {
            rep.premise_ok = false;
            rep.premise_failure_index = static_cast<int>(k + 1);
        }
    }
    if (!rep.premise_ok) {
        rep.holds = false;
        return rep;
    }
    const int n = static_cast<int>(E.size()) - 1;
    const auto euler = euler_sequence(inst, n);
    std::vector<double> times(n + 1);
    for (int k = 0; k <= n; ++k) times[k] = k * inst.T;
    const auto y = ode_solution(inst, times);
    rep.min_slack_euler = std::numeric_limits<double>::infinity();
    rep.min_slack_ode = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k) {
        const double se = euler.values[k] - E[k];
        const double so = y[k] - euler.values[k];
        rep.slack_euler.push_back(se);
        rep.slack_ode.push_back(so);
        rep.min_slack_euler = std::min(rep.min_slack_euler, se);
        rep.min_slack_ode = std::min(rep.min_slack_ode, so);
        const bool bad = se < -tol.sequence || so < -(tol.ode_rel * std::abs(y[k]) + tol.ode_abs);
        if (bad && rep.first_violation < 0) {
            rep.first_violation = k;
            rep.holds = false;
        }
    }
    return rep;
}

nlohmann::json BoundReport::to_json(bool with_samples) const
{
    nlohmann::json j{{"premise_ok", premise_ok}, {"premise_message", premise_message},
                     {"holds", holds},           {"violations", violations},
                     {"max_ratio", max_ratio},   {"holds_from", holds_from},
                     {"threshold", threshold}};
    if (with_samples) {
        j["t"] = t;
        j["Ehat"] = Ehat;
        j["bound"] = bound;
        j["valid"] = valid;
    }
    return j;
}

BoundReport discretcont_bound(const SequenceInstance& inst, const std::vector<double>& Ehat_k,
                              const std::vector<double>& times, double r, BoundForm form)
{
    BoundReport rep;
    if (!inst.has_F()) throw ConfigError("discretcont_bound needs F and its inverse");
    auto premise_fail = [&](std::string msg) {
        rep.premise_ok = false;
        rep.holds = false;
        rep.premise_message = std::move(msg);
        return rep;
    };
    if (Ehat_k.empty()) return premise_fail("empty sequence");
    if (!(Ehat_k.front() < inst.delta)) return premise_fail("Ehat(0) must be below delta");
    if (!(r >= Ehat_k.front()) || !(r > 0.0)) return premise_fail("r must be positive and at least Ehat(0)");
    for (std::size_t k = 0; k + 1 < Ehat_k.size(); ++k) {
        const double allowed = Ehat_k[k] * (1.0 - inst.rho_T * inst.F_inverse(Ehat_k[k]));
        if (Ehat_k[k + 1] > allowed + 1e-14 * std::abs(Ehat_k[k]) || Ehat_k[k + 1] > Ehat_k[k]) {
            return premise_fail("recurrence violated at index " + std::to_string(k + 1));
        }
    }
    const DecayMap map(std::make_shared<FunctionComposite>(inst.F, inst.F_inverse), r);
    const double T0 = inst.T0();
    const bool stated = form == BoundForm::stated;
    const double speed = stated ? inst.rho_T : 1.0;
    const double prefactor = stated ? inst.T : 1.0;
    rep.threshold = inst.T + T0 * map.z0() / speed;
    rep.holds_from = times.empty() ? 0.0 : times.front();
    int last_bad = -1;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const auto k = static_cast<std::size_t>(std::floor(t / inst.T));
        if (k >= Ehat_k.size()) throw ConfigError("discretcont_bound: sample time beyond the sequence");
        const double w = (t - inst.T) * speed / T0;
        double b = 0.0;
        bool ok = w >= map.z0();
        if (ok) b = prefactor * inst.F(1.0 / map.psi_inverse(w));
        rep.t.push_back(t);
        rep.Ehat.push_back(Ehat_k[k]);
        rep.bound.push_back(b);
        rep.valid.push_back(ok);
        if (!ok) continue;
        if (Ehat_k[k] > b) {
            ++rep.violations;
            last_bad = static_cast<int>(i);
        }
        if (b > 0.0) rep.max_ratio = std::max(rep.max_ratio, Ehat_k[k] / b);
        else if (Ehat_k[k] > 0.0) rep.max_ratio = std::numeric_limits<double>::infinity();
    }
    rep.holds = rep.violations == 0;
    if (last_bad >= 0) {
        rep.holds_from = last_bad + 1 < static_cast<int>(times.size()) ? times[last_bad + 1]
                                                                       : std::numeric_limits<double>::infinity();
    }
    return rep;
}

SequenceInstance random_instance(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double a = 1.0 + 2.0 * U(rng);
    const double rho_T = 0.05 + 0.9 * U(rng);
    const double T = 0.1 + 2.0 * U(rng);
    const double delta = 1.0;
    // rho_T M'(delta) = rho_T kappa a delta^{a-1} kept in (0.05, 0.95).
    const double kappa = (0.05 + 0.9 * U(rng)) / (rho_T * a);
    const double E0 = delta * (0.01 + 0.98 * U(rng));
    return make_power_instance(kappa, a, E0, rho_T, T, delta);
}

std::vector<double> recurrence_sequence(const SequenceInstance& inst, int n, std::mt19937_64* rng)
{
    std::vector<double> E;
    E.reserve(n + 1);
    double e = inst.E0;
    E.push_back(e);
    std::uniform_real_distribution<double> U(0.0, 0.01);
    for (int k = 0; k < n; ++k) {
        e = e - inst.rho_T * inst.M(e);
        if (rng) e *= 1.0 - U(*rng);
        E.push_back(e);
    }
    return E;
}

} // namespace decaylab
