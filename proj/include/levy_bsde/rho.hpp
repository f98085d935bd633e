#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "levy_bsde/error.hpp"

namespace levy_bsde {

/// Nondecreasing concave modulus rho with rho(0) = 0.
///
/// Families:
///  - Linear(L):       rho(x) = L x
///  - LogOsgood(x*):   rho(x) = x (1 - log(x / x*)) on (0, x*], continued affinely
///                     with the slope at x* (which is 0, so rho = x* beyond x*).
class RhoFunction {
public:
    enum class Family { Linear, LogOsgood };

    static RhoFunction linear(double slope = 1.0) {
        if (!(slope > 0.0) || !std::isfinite(slope)) throw ValidationError("rho: Linear slope must be > 0");
        return RhoFunction(Family::Linear, slope);
    }

    static RhoFunction log_osgood(double x_star = 1.0) {
        if (!(x_star > 0.0) || !std::isfinite(x_star)) throw ValidationError("rho: LogOsgood x* must be > 0");
        return RhoFunction(Family::LogOsgood, x_star);
    }

    RhoFunction() : RhoFunction(Family::Linear, 1.0) {}

    Family family() const noexcept { return family_; }
    double parameter() const noexcept { return param_; }

    std::string name() const { return family_ == Family::Linear ? "linear" : "log_osgood"; }

    double operator()(double x) const noexcept {
        if (x <= 0.0) return 0.0;
        switch (family_) {
            case Family::Linear:
                return param_ * x;
            case Family::LogOsgood:
                if (x >= param_) return param_ + slope_at_cutoff() * (x - param_);
                return x * (1.0 - std::log(x / param_));
        }
        return 0.0;
    }

    /// Right derivative.
    double derivative(double x) const noexcept {
        switch (family_) {
            case Family::Linear:
                return param_;
            case Family::LogOsgood:
                if (x <= 0.0) return std::numeric_limits<double>::infinity();
                if (x >= param_) return slope_at_cutoff();
                return -std::log(x / param_);
        }
        return 0.0;
    }

    /// Points where the formula changes; quadrature splits there.
    std::vector<double> breakpoints() const {
        if (family_ == Family::LogOsgood) return {param_};
        return {};
    }

    bool operator==(const RhoFunction&) const = default;

private:
    RhoFunction(Family f, double p) : family_(f), param_(p) {}
    static constexpr double slope_at_cutoff() noexcept { return 0.0; }

    Family family_;
    double param_;
};

/// Largest failure of monotonicity or concavity on a sorted grid:
/// max over consecutive slopes of (s_{i+1} - s_i) and of (-s_i). Values <= 0 mean
/// "nondecreasing and concave on this grid".
inline double rho_shape_violation(const RhoFunction& rho, std::span<const double> grid) {
    double worst = -std::numeric_limits<double>::infinity();
    double prev_slope = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        if (!(h > 0.0)) throw ValidationError("rho_shape_violation: grid must be increasing");
        const double slope = (rho(grid[i + 1]) - rho(grid[i])) / h;
        worst = std::max(worst, -slope);
        if (std::isfinite(prev_slope)) {
            // relative slack for rounding in the difference quotients
            worst = std::max(worst, slope - prev_slope - 1e-9 * (std::abs(slope) + std::abs(prev_slope)));
        }
        prev_slope = slope;
    }
    return worst;
}

/// n points spaced evenly in log10 between lo and hi (inclusive).
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ValidationError("log_grid: need 0 < lo < hi and n >= 2");
    std::vector<double> out(n);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

}  // namespace levy_bsde
