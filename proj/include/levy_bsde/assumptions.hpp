#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/generator.hpp"
#include "levy_bsde/parallel.hpp"
#include "levy_bsde/random.hpp"
#include "levy_bsde/rho.hpp"

namespace levy_bsde {

/// Ranges for sampling-based falsification. Each coordinate is drawn either
/// uniformly in [-radius, radius] or, with probability log_fraction, with a
/// log-uniform magnitude in [log_floor, radius] so the region near 0 is probed.
struct SamplerConfig {
    std::uint64_t seed = 20240101;
    std::size_t samples = 100000;
    double t_min = 0.0;
    double t_max = 1.0;
    double y_radius = 10.0;
    double z_radius = 10.0;
    double u_radius = 10.0;
    double log_fraction = 0.5;
    double log_floor = 1e-8;
};

/// Outcome of one numeric assumption audit. A pass means no sample violated
/// the inequality by more than the tolerance; it is not a proof.
struct AssumptionReport {
    std::string assumption;
    std::size_t samples = 0;
    double max_violation = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::string, std::vector<double>>> worst_point;
    bool pass = true;
    std::uint64_t seed = 0;
    double tolerance = 0.0;
};

/// One sampled argument pair for the two-point conditions.
struct SamplePoint {
    double t = 0.0;
    std::vector<double> y, y_prime, z, z_prime, u, u_prime;

    std::vector<std::pair<std::string, std::vector<double>>> labelled() const {
        return {{"t", {t}}, {"y", y}, {"y_prime", y_prime}, {"z", z},
                {"z_prime", z_prime}, {"u", u}, {"u_prime", u_prime}};
    }
};

namespace detail {

inline double draw_coordinate(StreamRng& rng, double radius, const SamplerConfig& cfg) {
    if (radius <= 0.0) return 0.0;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    if (rng.uniform() < cfg.log_fraction && cfg.log_floor < radius) {
        const double lo = std::log(cfg.log_floor);
        const double hi = std::log(radius);
        return sign * std::exp(lo + (hi - lo) * rng.uniform());
    }
    return sign * radius * rng.uniform();
}

inline void draw_vector(StreamRng& rng, double radius, const SamplerConfig& cfg, std::vector<double>& out) {
    for (double& v : out) v = draw_coordinate(rng, radius, cfg);
}

/// Pulls a vector back into the Euclidean ball of the given radius.
inline void clamp_to_ball(std::vector<double>& v, double radius) {
    const double norm = euclidean_norm(v);
    if (norm > radius && norm > 0.0) {
        for (double& x : v) x *= radius / norm;
    }
}

inline SamplePoint draw_point(const GeneratorSpec& spec, const SamplerConfig& cfg, std::size_t index) {
    StreamRng rng(cfg.seed, index, 0, kSamplerTag);
    SamplePoint pt;
    pt.t = cfg.t_min + (cfg.t_max - cfg.t_min) * rng.uniform();
    pt.y.resize(spec.d);
    pt.y_prime.resize(spec.d);
    pt.z.resize(spec.z_size());
    pt.z_prime.resize(spec.z_size());
    pt.u.resize(spec.u_size());
    pt.u_prime.resize(spec.u_size());
    draw_vector(rng, cfg.y_radius, cfg, pt.y);
    draw_vector(rng, cfg.y_radius, cfg, pt.y_prime);
    // Every fourth sample puts y' next to y to probe the local modulus.
    if (index % 4 == 3) {
        for (std::size_t c = 0; c < spec.d; ++c) pt.y_prime[c] = pt.y[c] + draw_coordinate(rng, 1e-2, cfg);
    }
    draw_vector(rng, cfg.z_radius, cfg, pt.z);
    draw_vector(rng, cfg.z_radius, cfg, pt.z_prime);
    draw_vector(rng, cfg.u_radius, cfg, pt.u);
    draw_vector(rng, cfg.u_radius, cfg, pt.u_prime);
    return pt;
}

inline double diff_norm(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline std::vector<double> diff(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

/// Runs `violation(i)` over all samples and keeps the worst finite result.
template <typename ViolationFn, typename PointFn>
AssumptionReport audit(std::string id, std::size_t samples, std::uint64_t seed, double tolerance,
                       ViolationFn&& violation, PointFn&& point_of) {
    std::vector<double> values(samples, -std::numeric_limits<double>::infinity());
    parallel_for(samples, [&](std::size_t i) { values[i] = violation(i); });
    AssumptionReport report;
    report.assumption = std::move(id);
    report.samples = samples;
    report.seed = seed;
    report.tolerance = tolerance;
    std::size_t worst = samples;
    for (std::size_t i = 0; i < samples; ++i) {
        if (values[i] > report.max_violation) {
            report.max_violation = values[i];
            worst = i;
        }
    }
    if (worst < samples) report.worst_point = point_of(worst);
    report.pass = report.max_violation <= tolerance;
    return report;
}

}  // namespace detail

/// LHS - RHS of the monotonicity condition for the branch selected by spec.p.
///   p >= 2: |dy|^{p-2} <dy, df> <= alpha |dy|^{p-2} rho(|dy|^2) + mu |dy|^p + beta |dy|^{p-1} (|dz| + ||du||)
///   p <  2: |dy|^{p-2} <dy, df> <= alpha rho(|dy|^p) + mu |dy|^p + |dy|^{p-1} (beta1 |dz| + beta2 ||du||)
/// Returns -inf for y == y' in the p < 2 branch, where the condition is not imposed.
inline double monotonicity_violation(const GeneratorSpec& spec, const SamplePoint& pt) {
    const auto f = spec.evaluate(pt.t, pt.y, pt.z, pt.u);
    const auto g = spec.evaluate(pt.t, pt.y_prime, pt.z_prime, pt.u_prime);
    const auto dy = detail::diff(pt.y, pt.y_prime);
    const double ady = euclidean_norm(dy);
    const double adz = detail::diff_norm(pt.z, pt.z_prime);
    const auto du = detail::diff(pt.u, pt.u_prime);
    const double adu = lnu_norm(du, spec.intensities);
    const double p = spec.p;
    const auto& cf = spec.coefficients;
    const double t = pt.t;

    double inner = 0.0;
    for (std::size_t c = 0; c < spec.d; ++c) inner += dy[c] * (f[c] - g[c]);

    if (p >= 2.0) {
        const double w = p == 2.0 ? 1.0 : std::pow(ady, p - 2.0);
        const double lhs = w * inner;
        const double rhs = cf.alpha(t) * w * spec.rho(ady * ady) + cf.mu(t) * std::pow(ady, p) +
                           cf.beta(t) * std::pow(ady, p - 1.0) * (adz + adu);
        return lhs - rhs;
    }
    if (ady == 0.0) return -std::numeric_limits<double>::infinity();
    const double lhs = std::pow(ady, p - 2.0) * inner;
    const double rhs = cf.alpha(t) * spec.rho(std::pow(ady, p)) + cf.mu(t) * std::pow(ady, p) +
                       std::pow(ady, p - 1.0) * (cf.beta1(t) * adz + cf.beta2(t) * adu);
    return lhs - rhs;
}

/// Samples the monotonicity condition (A3, branch by spec.p).
inline AssumptionReport check_monotonicity(const GeneratorSpec& spec, const SamplerConfig& cfg,
                                           double tolerance) {
    spec.validate();
    const std::string id = spec.p >= 2.0 ? "A3>=2" : "A3<2";
    auto point = [&](std::size_t i) {
        auto pt = detail::draw_point(spec, cfg, i);
        if (spec.p < 2.0 && pt.y == pt.y_prime) pt.y_prime[0] += cfg.log_floor;
        return pt;
    };
    return detail::audit(
        id, cfg.samples, cfg.seed, tolerance,
        [&](std::size_t i) { return monotonicity_violation(spec, point(i)); },
        [&](std::size_t i) { return point(i).labelled(); });
}

/// f(t, 0, 0, 0) against the declared f0 at sampled times (the A1 consistency check).
inline AssumptionReport check_f0_consistency(const GeneratorSpec& spec, const SamplerConfig& cfg,
                                             double tolerance = 0.0) {
    spec.validate();
    const std::vector<double> zy(spec.d, 0.0), zz(spec.z_size(), 0.0), zu(spec.u_size(), 0.0);
    auto time_of = [&](std::size_t i) {
        StreamRng rng(cfg.seed, i, 1, kSamplerTag);
        return cfg.t_min + (cfg.t_max - cfg.t_min) * rng.uniform();
    };
    return detail::audit(
        "A1", cfg.samples, cfg.seed, tolerance,
        [&](std::size_t i) {
            const double t = time_of(i);
            const auto f = spec.evaluate(t, zy, zz, zu);
            const auto f0 = spec.f0_at(t);
            return detail::diff_norm(f, f0);
        },
        [&](std::size_t i) {
            return std::vector<std::pair<std::string, std::vector<double>>>{{"t", {time_of(i)}}};
        });
}

/// Estimated psi_r on a time grid plus the report on its finiteness.
struct GrowthEstimate {
    AssumptionReport report;
    std::vector<double> t;
    std::vector<double> psi;

    /// Piecewise-linear interpolation of the estimate, constant outside the grid.
    double operator()(double time) const {
        if (t.empty()) return 0.0;
        if (time <= t.front()) return psi.front();
        if (time >= t.back()) return psi.back();
        const auto it = std::upper_bound(t.begin(), t.end(), time);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
        return (1.0 - w) * psi[i - 1] + w * psi[i];
    }
};

/// Estimates psi_r(t) = sup_{|y| <= r} |f(t,y,z,u) - f0(t)| - Phi(t)(|z| + ||u||) by sampling
/// at each node, with Phi the declared beta (beta1 + beta2 below p = 2). The estimate is
/// a sampled supremum, not a certificate. The report fails when psi is non-finite anywhere.
inline GrowthEstimate check_growth(const GeneratorSpec& spec, double r, std::span<const double> nodes,
                                   const SamplerConfig& cfg, double tolerance = 0.0) {
    spec.validate();
    if (!(r > 0.0)) throw ValidationError("check_growth: radius must be > 0");
    if (nodes.empty()) throw ValidationError("check_growth: need at least one time node");
    const std::size_t per_node = std::max<std::size_t>(1, cfg.samples / nodes.size());
    SamplerConfig local = cfg;
    local.y_radius = r;

    GrowthEstimate est;
    est.t.assign(nodes.begin(), nodes.end());
    est.psi.assign(nodes.size(), 0.0);
    std::vector<double> worst_y(spec.d, 0.0);
    double worst_t = nodes.front();
    double overall = 0.0;

    for (std::size_t n = 0; n < nodes.size(); ++n) {
        const double t = nodes[n];
        const auto f0 = spec.f0_at(t);
        const double phi = spec.phi(t);
        std::vector<double> excess(per_node + 3, 0.0);
        auto point = [&](std::size_t s) {
            SamplePoint pt;
            if (s < per_node) {
                pt = detail::draw_point(spec, local, n * per_node + s);
                detail::clamp_to_ball(pt.y, r);
            } else {
                // Deterministic probes: y = 0 and y = +-r e_1 with z = u = 0.
                pt.y.assign(spec.d, 0.0);
                pt.z.assign(spec.z_size(), 0.0);
                pt.u.assign(spec.u_size(), 0.0);
                if (s == per_node + 1) pt.y[0] = r;
                if (s == per_node + 2) pt.y[0] = -r;
            }
            pt.t = t;
            return pt;
        };
        parallel_for(per_node + 3, [&](std::size_t s) {
            const auto pt = point(s);
            const auto f = spec.evaluate(t, pt.y, pt.z, pt.u);
            const double growth = detail::diff_norm(f, f0);
            excess[s] = growth - phi * (euclidean_norm(pt.z) + lnu_norm(pt.u, spec.intensities));
        });
        double sup = 0.0;
        std::size_t arg = 0;
        for (std::size_t s = 0; s < excess.size(); ++s) {
            if (!(excess[s] <= sup)) {  // NaN propagates as a failure
                sup = excess[s];
                arg = s;
            }
        }
        est.psi[n] = sup;
        if (n == 0 || !(sup <= overall)) {
            overall = sup;
            worst_t = t;
            worst_y = point(arg).y;
        }
    }

    AssumptionReport& rep = est.report;
    rep.assumption = "A2";
    rep.samples = nodes.size() * (per_node + 3);
    rep.seed = cfg.seed;
    rep.tolerance = tolerance;
    bool finite = true;
    for (double v : est.psi) finite = finite && std::isfinite(v);
    // Violation is 0 when psi is finite on every node, +inf otherwise.
    rep.max_violation = finite ? 0.0 : std::numeric_limits<double>::infinity();
    rep.pass = rep.max_violation <= tolerance;
    rep.worst_point = {{"t", {worst_t}}, {"y", worst_y}, {"psi", {overall}}};
    return est;
}

/// f(t,y,z,u) - f(t,y,z,u') - sum_j lambda_j (u'_j - u_j) for an ordered pair u <= u'.
/// Returns nullopt when the pair is not ordered componentwise.
inline std::optional<double> gamma_pair_violation(const GeneratorSpec& spec, double t, std::span<const double> y,
                                                  std::span<const double> z, std::span<const double> u,
                                                  std::span<const double> u_prime) {
    if (spec.d != 1) throw UnsupportedDimensionError("(A-gamma) is only defined for d = 1");
    if (u.size() != spec.atom_count() || u_prime.size() != spec.atom_count()) {
        throw ValidationError("gamma_pair_violation: u length must equal the atom count");
    }
    double integral = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (u_prime[j] < u[j]) return std::nullopt;
        integral += spec.intensities[j] * (u_prime[j] - u[j]);
    }
    const auto f = spec.evaluate(t, y, z, u);
    const auto g = spec.evaluate(t, y, z, u_prime);
    return (f[0] - g[0]) - integral;
}

/// Samples condition (A-gamma): f(s,y,z,u) - f(s,y,z,u') <= int (u' - u) dnu for u <= u'.
inline AssumptionReport check_gamma(const GeneratorSpec& spec, const LevyModel& model, const SamplerConfig& cfg,
                                    double tolerance) {
    if (spec.d != 1 || model.d != 1) throw UnsupportedDimensionError("check_gamma: requires d = 1");
    spec.validate();
    spec.check_model(model);
    auto point = [&](std::size_t i) {
        auto pt = detail::draw_point(spec, cfg, i);
        StreamRng rng(cfg.seed, i, 2, kSamplerTag);
        for (std::size_t j = 0; j < pt.u.size(); ++j) {
            pt.u_prime[j] = pt.u[j] + std::abs(detail::draw_coordinate(rng, cfg.u_radius, cfg));
        }
        pt.y_prime = pt.y;
        pt.z_prime = pt.z;
        return pt;
    };
    return detail::audit(
        "Agamma", cfg.samples, cfg.seed, tolerance,
        [&](std::size_t i) {
            const auto pt = point(i);
            return *gamma_pair_violation(spec, pt.t, pt.y, pt.z, pt.u, pt.u_prime);
        },
        [&](std::size_t i) { return point(i).labelled(); });
}

/// Checks the rho inequalities used throughout the a priori estimates:
///   p >= 2: rho(|y|^2) |y|^{p-2} <= rho(|y|^p) + rho(1) |y|^p
///   p <  2: rho(|y|^p) |y|^{2-p} <= rho(|y|^2) + rho(1) |y|^2
inline AssumptionReport check_rho_bounds(const RhoFunction& rho, double p, std::span<const double> y_grid,
                                         double tolerance = 0.0) {
    if (!(p > 0.0)) throw ValidationError("check_rho_bounds: p must be > 0");
    const double rho1 = rho(1.0);
    AssumptionReport report = detail::audit(
        "rho_bounds", y_grid.size(), 0, tolerance,
        [&](std::size_t i) {
            const double a = std::abs(y_grid[i]);
            if (p >= 2.0) {
                const double lhs = rho(a * a) * std::pow(a, p - 2.0);
                const double rhs = rho(std::pow(a, p)) + rho1 * std::pow(a, p);
                return lhs - rhs;
            }
            const double lhs = rho(std::pow(a, p)) * std::pow(a, 2.0 - p);
            const double rhs = rho(a * a) + rho1 * a * a;
            return lhs - rhs;
        },
        [&](std::size_t i) {
            return std::vector<std::pair<std::string, std::vector<double>>>{{"y", {y_grid[i]}}, {"p", {p}}};
        });
    return report;
}

}  // namespace levy_bsde
