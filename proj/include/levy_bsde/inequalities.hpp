#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "levy_bsde/error.hpp"
#include "levy_bsde/format.hpp"
#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/rho.hpp"

namespace levy_bsde {

inline constexpr double kQuadratureRelTol = 1e-10;
inline constexpr double kQuadratureAbsTol = 1e-14;
inline constexpr double kBracketLo = 1e-300;
inline constexpr double kBracketHi = 1e300;

namespace detail {

/// int_{log a}^{log b} e^s / rho(e^s) ds on one smooth piece.
inline double reciprocal_piece(const RhoFunction& rho, double log_a, double log_b) {
    if (log_a == log_b) return 0.0;
    auto integrand = [&rho](double s) {
        const double x = std::exp(s);
        return x / rho(x);
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double error = 0.0, l1 = 0.0;
    const double value = GK::integrate(integrand, log_a, log_b, 15, kQuadratureRelTol, &error, &l1);
    const double allowed = std::max(kQuadratureRelTol * l1, kQuadratureAbsTol);
    if (std::isfinite(value) && error > allowed) {
        // Boost's estimate has an absolute floor near 3e-11 on very short intervals;
        // fall back to comparing against the two-half sum.
        const double mid = 0.5 * (log_a + log_b);
        const double halves = GK::integrate(integrand, log_a, mid, 0) + GK::integrate(integrand, mid, log_b, 0);
        error = std::abs(halves - value);
    }
    if (!std::isfinite(value) || error > allowed) {
        throw NumericError("quadrature of 1/rho did not converge on [" + format_double(std::exp(log_a)) + ", " +
                           format_double(std::exp(log_b)) + "] (error estimate " + format_double(error) + ")");
    }
    return value;
}

}  // namespace detail

/// int_a^b dx / rho(x) for 0 < a, b, computed in log space and split at the
/// breakpoints of rho. Negative when b < a.
inline double integrate_reciprocal(const RhoFunction& rho, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("integrate_reciprocal: limits must be > 0");
    if (a == b) return 0.0;
    const double sign = a < b ? 1.0 : -1.0;
    const double lo = std::log(std::min(a, b));
    const double hi = std::log(std::max(a, b));
    std::vector<double> cuts{lo};
    for (double x : rho.breakpoints()) {
        const double s = std::log(x);
        if (s > lo && s < hi) cuts.push_back(s);
    }
    cuts.push_back(hi);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += detail::reciprocal_piece(rho, cuts[i], cuts[i + 1]);
    return sign * total;
}

/// G(x) = int_1^x dr / rho(r).
inline double bihari_G(const RhoFunction& rho, double x) {
    if (x == 0.0) return -std::numeric_limits<double>::infinity();
    return integrate_reciprocal(rho, 1.0, x);
}

/// G^{-1}(v) by bracketed root finding in log x on [1e-300, 1e300].
/// `in_domain` is false when v lies outside G([1e-300, 1e300]); the value is then
/// +inf above the range and 0 below it.
struct InverseValue {
    double value = 0.0;
    bool in_domain = true;
};

inline InverseValue bihari_G_inverse(const RhoFunction& rho, double v) {
    if (std::isnan(v)) throw NumericError("G^{-1}: argument is NaN");
    if (v == 0.0) return {1.0, true};
    const double limit = v > 0.0 ? std::log(kBracketHi) : std::log(kBracketLo);
    auto g = [&](double s) { return bihari_G(rho, std::exp(s)) - v; };
    // G(1) = 0, so expand a bracket away from s = 0 with doubling width;
    // far-out evaluations of G are expensive and usually unnecessary.
    double near = 0.0, g_near = -v;
    double far = v > 0.0 ? 1.0 : -1.0;
    double g_far = g(far);
    while (std::signbit(g_far) == std::signbit(g_near) && g_far != 0.0) {
        if (far == limit) {
            return v > 0.0 ? InverseValue{std::numeric_limits<double>::infinity(), false} : InverseValue{0.0, false};
        }
        near = far;
        g_near = g_far;
        far = v > 0.0 ? std::min(2.0 * far, limit) : std::max(2.0 * far, limit);
        g_far = g(far);
    }
    if (g_far == 0.0) return {std::exp(far), true};
    double lo = near, hi = far, g_lo = g_near, g_hi = g_far;
    if (lo > hi) {
        std::swap(lo, hi);
        std::swap(g_lo, g_hi);
    }
    std::uintmax_t iterations = 400;
    const auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, g_lo, g_hi,
                                                          boost::math::tools::eps_tolerance<double>(52), iterations);
    return {std::exp(a + (b - a) / 2.0), true};
}

/// int_{t_i}^T K ds by the trapezoid rule on the grid, one entry per node.
inline std::vector<double> tail_integral(std::span<const double> K, const TimeGrid& grid) {
    const std::size_t N = grid.steps();
    if (K.size() != N + 1) throw ValidationError("K must be sampled at every grid node");
    for (double k : K) {
        if (!(k >= 0.0) || !std::isfinite(k)) throw ValidationError("K must be finite and >= 0");
    }
    std::vector<double> tail(N + 1, 0.0);
    for (std::size_t i = N; i-- > 0;) tail[i] = tail[i + 1] + grid.dt(i) * (K[i] + K[i + 1]) / 2.0;
    return tail;
}

/// Backward Bihari-LaSalle bound y(t) <= G^{-1}(G(c) + int_t^T K).
struct BihariBound {
    double c = 0.0;
    RhoFunction rho;
    std::vector<double> t;
    std::vector<double> bound;
    std::vector<bool> in_domain;
};

inline BihariBound bihari_bound(double c, std::span<const double> K, const RhoFunction& rho, const TimeGrid& grid) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("bihari_bound: c must be finite and >= 0");
    const auto tail = tail_integral(K, grid);
    BihariBound out;
    out.c = c;
    out.rho = rho;
    out.t.assign(grid.nodes().begin(), grid.nodes().end());
    out.bound.resize(tail.size());
    out.in_domain.assign(tail.size(), true);
    if (c == 0.0) {
        std::fill(out.bound.begin(), out.bound.end(), 0.0);
        return out;
    }
    const double gc = bihari_G(rho, c);
    for (std::size_t i = 0; i < tail.size(); ++i) {
        if (tail[i] == 0.0) {
            out.bound[i] = c;
            continue;
        }
        const auto inv = bihari_G_inverse(rho, gc + tail[i]);
        out.bound[i] = inv.value;
        out.in_domain[i] = inv.in_domain;
    }
    return out;
}

/// c exp(int_t^T K) with the same trapezoid integral as bihari_bound.
inline std::vector<double> gronwall_bound(double c, std::span<const double> K, const TimeGrid& grid) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("gronwall_bound: c must be finite and >= 0");
    auto tail = tail_integral(K, grid);
    for (double& v : tail) v = c * std::exp(v);
    return tail;
}

/// Equality case of the Bihari hypothesis iterated backward on the grid:
/// y_N = c, y_i = y_{i+1} + dt_i (K_i + K_{i+1}) / 2 rho(y_{i+1}), with K integrated as in bihari_bound.
inline std::vector<double> bihari_equality_iterate(double c, std::span<const double> K, const RhoFunction& rho,
                                                   const TimeGrid& grid) {
    const std::size_t N = grid.steps();
    if (K.size() != N + 1) throw ValidationError("K must be sampled at every grid node");
    std::vector<double> y(N + 1, c);
    for (std::size_t i = N; i-- > 0;) y[i] = y[i + 1] + grid.dt(i) * (K[i] + K[i + 1]) / 2.0 * rho(y[i + 1]);
    return y;
}

struct YoungResult {
    double product = 0.0;
    double bound = 0.0;
    bool holds = true;
};

/// ab <= a^p / (p R) + b^q R^{q/p} / q for conjugate p, q and R > 0.
inline YoungResult young_bound(double a, double b, double p, double q, double R) {
    if (!(a >= 0.0) || !(b >= 0.0)) throw ValidationError("young_bound: a and b must be >= 0");
    if (!(p > 1.0) || !(q > 1.0)) throw ValidationError("young_bound: p and q must be > 1");
    if (std::abs(1.0 / p + 1.0 / q - 1.0) > 1e-12) throw ValidationError("young_bound: 1/p + 1/q must equal 1");
    if (!(R > 0.0)) throw ValidationError("young_bound: R must be > 0");
    YoungResult r;
    r.product = a * b;
    r.bound = std::pow(a, p) / (p * R) + std::pow(b, q) * std::pow(R, q / p) / q;
    // a tolerance of a few ulps covers the equality case a^p = b^q R^{q}
    r.holds = r.product <= r.bound * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
    return r;
}

/// Partial integrals int_{eps0 10^{-m}}^{eps0} dx / rho(x), m = 1..decades.
/// Verdict: every increment is positive and, over the second half of the decades,
/// m * increment_m stays at least half of the first increment (increments do not
/// decay faster than 1/m, as they would for a convergent integral).
struct OsgoodReport {
    double eps0 = 1.0;
    std::vector<double> partials;
    std::vector<double> increments;
    bool diverging = false;
};

inline OsgoodReport osgood_divergence(const RhoFunction& rho, double eps0 = 1.0, unsigned decades = 12) {
    if (!(eps0 > 0.0)) throw ValidationError("osgood_divergence: eps0 must be > 0");
    if (decades < 3) throw ValidationError("osgood_divergence: need at least 3 decades");
    OsgoodReport r;
    r.eps0 = eps0;
    double prev = 0.0;
    for (unsigned m = 1; m <= decades; ++m) {
        const double lo = eps0 * std::pow(10.0, -static_cast<double>(m));
        const double hi = eps0 * std::pow(10.0, -static_cast<double>(m - 1));
        const double piece = integrate_reciprocal(rho, lo, hi);
        r.increments.push_back(piece);
        prev += piece;
        r.partials.push_back(prev);
    }
    bool ok = std::all_of(r.increments.begin(), r.increments.end(), [](double d) { return d > 0.0; });
    for (unsigned m = decades / 2 + 1; m <= decades && ok; ++m) {
        ok = static_cast<double>(m) * r.increments[m - 1] >= 0.5 * r.increments[0];
    }
    r.diverging = ok;
    return r;
}

}  // namespace levy_bsde
