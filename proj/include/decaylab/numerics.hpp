#pragma once

// Scalar root finding, adaptive quadrature and explicit ODE integration.
// Everything here is templated on the scalar type and header-only.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace decaylab {

/// Raised when a numerical procedure cannot produce a finite answer.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for invalid user configuration (bad parameters, inconsistent specs).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace numerics {

template <typename Scalar>
Scalar bisection_midpoint(Scalar lo, Scalar hi)
{
    // Geometric midpoint on wide positive brackets so tiny roots resolve quickly.
    if (lo > Scalar(0) && hi > Scalar(4) * lo) {
        return std::sqrt(lo) * std::sqrt(hi);
    }
    return lo + (hi - lo) / Scalar(2);
}

/// Solves fn(x) = target for a nondecreasing fn on [lo, hi].
///
/// The bracket is halved until it collapses to adjacent floating point
/// numbers (or until `rel_tol` relative width is reached, when positive).
/// If the target lies outside [fn(lo), fn(hi)] the nearer endpoint is returned.
template <typename Scalar, typename Fn>
Scalar solve_increasing(Fn&& fn, Scalar target, Scalar lo, Scalar hi, Scalar rel_tol = Scalar(0),
                        int max_iter = 2000)
{
    if (!(lo <= hi)) {
        throw std::invalid_argument("solve_increasing: empty bracket");
    }
    const Scalar flo = fn(lo);
    if (!(flo < target)) {
        if (std::isnan(flo)) {
            throw NumericalFailure("solve_increasing: non-finite value at lower bracket");
        }
        return lo;
    }
    const Scalar fhi = fn(hi);
    if (!(fhi > target)) {
        if (std::isnan(fhi)) {
            throw NumericalFailure("solve_increasing: non-finite value at upper bracket");
        }
        return hi;
    }
    for (int it = 0; it < max_iter; ++it) {
        const Scalar mid = bisection_midpoint(lo, hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const Scalar fm = fn(mid);
        if (std::isnan(fm)) {
            throw NumericalFailure("solve_increasing: non-finite value inside bracket");
        }
        if (fm < target) {
            lo = mid;
        } else if (fm > target) {
            hi = mid;
        } else {
            return mid;
        }
        if (rel_tol > Scalar(0) && (hi - lo) <= rel_tol * std::abs(hi)) {
            break;
        }
    }
    return lo + (hi - lo) / Scalar(2);
}

/// Grows `hi` geometrically until fn(hi) >= target. Returns the new bracket end.
template <typename Scalar, typename Fn>
Scalar expand_upper(Fn&& fn, Scalar target, Scalar hi, Scalar limit = std::numeric_limits<Scalar>::max() / 4)
{
    while (fn(hi) < target) {
        if (hi >= limit) {
            throw NumericalFailure("expand_upper: target not reachable");
        }
        hi = std::min(limit, hi * Scalar(2));
    }
    return hi;
}

/// Root of a scalar monotone equation phi(v) = 0 with phi increasing, using Newton steps
/// kept inside a shrinking bisection bracket.
template <typename Scalar, typename Fn, typename Dfn>
Scalar safeguarded_newton(Fn&& phi, Dfn&& dphi, Scalar lo, Scalar hi, Scalar tol, int max_iter = 200)
{
    Scalar flo = phi(lo);
    Scalar fhi = phi(hi);
    if (flo > Scalar(0) || fhi < Scalar(0)) {
        throw NumericalFailure("safeguarded_newton: root not bracketed");
    }
    if (flo == Scalar(0)) return lo;
    if (fhi == Scalar(0)) return hi;
    Scalar x = lo + (hi - lo) / Scalar(2);
    for (int it = 0; it < max_iter; ++it) {
        const Scalar fx = phi(x);
        if (!std::isfinite(fx)) {
            throw NumericalFailure("safeguarded_newton: non-finite residual");
        }
        if (fx == Scalar(0)) return x;
        if (fx < Scalar(0)) lo = x; else hi = x;
        const Scalar d = dphi(x);
        Scalar next = (d > Scalar(0) && std::isfinite(d)) ? x - fx / d : lo - Scalar(1);
        if (!(next > lo && next < hi)) {
            next = lo + (hi - lo) / Scalar(2);
        }
        if (std::abs(next - x) <= tol * (Scalar(1) + std::abs(next)) || hi - lo <= tol * (Scalar(1) + std::abs(hi))) {
            return next;
        }
        x = next;
    }
    throw NumericalFailure("safeguarded_newton: no convergence");
}

template <typename Scalar>
struct QuadratureResult {
    Scalar value{};
    Scalar error{};
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar, typename Fn>
void gk15(Fn& fn, Scalar a, Scalar b, Scalar& result, Scalar& error)
{
    const Scalar center = (a + b) / Scalar(2);
    const Scalar half = (b - a) / Scalar(2);
    const Scalar fc = fn(center);
    Scalar kronrod = fc * Scalar(kKronrodWeights[7]);
    Scalar gauss = fc * Scalar(kGaussWeights[3]);
    for (int j = 0; j < 7; ++j) {
        const Scalar dx = half * Scalar(kKronrodNodes[j]);
        const Scalar f1 = fn(center - dx);
        const Scalar f2 = fn(center + dx);
        kronrod += Scalar(kKronrodWeights[j]) * (f1 + f2);
        if (j % 2 == 1) {
            gauss += Scalar(kGaussWeights[j / 2]) * (f1 + f2);
        }
    }
    result = kronrod * half;
    error = std::abs((kronrod - gauss) * half);
}

} // namespace detail

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of fn over [a, b].
///
/// Intervals with the largest error estimate are bisected until the summed
/// estimate is below max(abs_tol, rel_tol * |I|) or `max_intervals` is reached.
template <typename Scalar, typename Fn>
QuadratureResult<Scalar> integrate(Fn&& fn, Scalar a, Scalar b, Scalar abs_tol = Scalar(1e-12),
                                   Scalar rel_tol = Scalar(1e-9), int max_intervals = 2000)
{
    QuadratureResult<Scalar> out;
    if (a == b) {
        return out;
    }
    Scalar sign = Scalar(1);
    if (b < a) {
        std::swap(a, b);
        sign = Scalar(-1);
    }
    struct Panel {
        Scalar a, b, value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };
    std::priority_queue<Panel> heap;
    Panel first{a, b, Scalar(0), Scalar(0)};
    detail::gk15(fn, a, b, first.value, first.error);
    out.evaluations = 15;
    heap.push(first);
    Scalar total = first.value;
    Scalar total_err = first.error;
    int count = 1;
    while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (count >= max_intervals) {
            out.converged = false;
            break;
        }
        Panel worst = heap.top();
        const Scalar mid = worst.a + (worst.b - worst.a) / Scalar(2);
        if (!(mid > worst.a && mid < worst.b)) {
            out.converged = false;
            break;
        }
        heap.pop();
        Panel left{worst.a, mid, Scalar(0), Scalar(0)};
        Panel right{mid, worst.b, Scalar(0), Scalar(0)};
        detail::gk15(fn, left.a, left.b, left.value, left.error);
        detail::gk15(fn, right.a, right.b, right.value, right.error);
        out.evaluations += 30;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++count;
    }
    // Re-sum in a fixed order so the result does not carry drift from the running updates.
    std::vector<Panel> panels;
    panels.reserve(heap.size());
    while (!heap.empty()) {
        panels.push_back(heap.top());
        heap.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const Panel& l, const Panel& r) { return l.a < r.a; });
    total = Scalar(0);
    total_err = Scalar(0);
    for (const auto& p : panels) {
        total += p.value;
        total_err += p.error;
    }
    if (!std::isfinite(total)) {
        throw NumericalFailure("integrate: non-finite integral");
    }
    out.value = sign * total;
    out.error = total_err;
    return out;
}

/// Dormand–Prince 5(4) integration of a scalar autonomous ODE y' = rhs(y).
///
/// Returns y at each requested (sorted, nonnegative) output time. Steps are
/// clipped so that every output time is hit exactly.
template <typename Scalar, typename Rhs>
std::vector<Scalar> dopri5(Rhs&& rhs, Scalar y0, const std::vector<Scalar>& times, Scalar rtol = Scalar(1e-12),
                           Scalar atol = Scalar(1e-14))
{
    static constexpr Scalar c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr Scalar a21 = 1.0 / 5;
    static constexpr Scalar a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr Scalar a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr Scalar a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr Scalar a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr Scalar b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr Scalar e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2; (void)c3; (void)c4; (void)c5;

    std::vector<Scalar> out;
    out.reserve(times.size());
    Scalar t = 0;
    Scalar y = y0;
    Scalar h = Scalar(1e-3);
    Scalar k1 = rhs(y);
    for (const Scalar target : times) {
        if (target < t) {
            throw std::invalid_argument("dopri5: output times must be sorted and nonnegative");
        }
        while (t < target) {
            const bool last = t + h >= target;
            const Scalar step = last ? target - t : h;
            const Scalar k2 = rhs(y + step * a21 * k1);
            const Scalar k3 = rhs(y + step * (a31 * k1 + a32 * k2));
            const Scalar k4 = rhs(y + step * (a41 * k1 + a42 * k2 + a43 * k3));
            const Scalar k5 = rhs(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const Scalar k6 = rhs(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const Scalar ynew = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            if (!std::isfinite(ynew)) {
                throw NumericalFailure("dopri5: non-finite state");
            }
            const Scalar k7 = rhs(ynew);
            const Scalar err = std::abs(step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
            const Scalar scale = atol + rtol * std::max(std::abs(y), std::abs(ynew));
            const Scalar ratio = err / scale;
            const Scalar factor = ratio == Scalar(0)
                                      ? Scalar(5)
                                      : std::clamp(Scalar(0.9) * std::pow(ratio, Scalar(-0.2)), Scalar(0.2), Scalar(5));
            if (ratio <= Scalar(1)) {
                t = last ? target : t + step;
                y = ynew;
                k1 = k7;
                // A step shortened to land on an output time does not shrink the next proposal.
                h = last ? std::max(h, step * factor) : step * factor;
            } else {
                h = step * factor;
            }
            if (h < std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(t))) {
                throw NumericalFailure("dopri5: step size underflow");
            }
        }
        out.push_back(y);
    }
    return out;
}

} // namespace numerics
} // namespace decaylab
