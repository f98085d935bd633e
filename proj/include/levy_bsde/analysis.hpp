#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levy_bsde/assumptions.hpp"
#include "levy_bsde/error.hpp"
#include "levy_bsde/generator.hpp"
#include "levy_bsde/path_ensemble.hpp"
#include "levy_bsde/random.hpp"
#include "levy_bsde/rho.hpp"
#include "levy_bsde/solver.hpp"
#include "levy_bsde/terminal.hpp"
#include "levy_bsde/truncation.hpp"

namespace levy_bsde {

/// Empirical mean and standard error of per-path samples.
struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanEstimate mean_estimate(std::span<const double> x) {
    MeanEstimate e;
    if (x.empty()) return e;
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += v;
    e.mean = s / n;
    if (x.size() < 2) return e;
    double ss = 0.0;
    for (double v : x) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / (n - 1.0) / n);
    return e;
}

/// Solution norms. Each estimate is (mean of a per-path p-th power)^{1/p};
/// the *_se fields are standard errors of those p-th power means.
///   sp:   sup_i |Y_i|^p
///   lpw:  (sum_i |Z_i|^2 dt_i)^{p/2}
///   lpn:  (sum_i ||U_i||^2 dt_i)^{p/2}
///   i_f0: (sum_i |f0(t_i)| dt_i)^p
struct NormReport {
    double p = 2.0;
    double sp = 0.0;
    double lpw = 0.0;
    double lpn = 0.0;
    double i_f0 = 0.0;
    double sp_se = 0.0;
    double lpw_se = 0.0;
    double lpn_se = 0.0;
    std::vector<double> sp_terms;
    std::vector<double> lpw_terms;
    std::vector<double> lpn_terms;
    std::vector<double> sup_abs_y;  // sup_i |Y_i| per path
};

inline NormReport estimate_norms(const BsdeSolution& sol, const GeneratorSpec& spec, double p) {
    if (!(p > 0.0)) throw ValidationError("estimate_norms: p must be > 0");
    const std::size_t M = sol.paths;
    const std::size_t N = sol.steps();
    const auto& grid = sol.grid;
    NormReport r;
    r.p = p;
    r.sp_terms.resize(M);
    r.lpw_terms.resize(M);
    r.lpn_terms.resize(M);
    r.sup_abs_y.resize(M);
    std::vector<double> f0_terms(M);
    parallel_for(M, [&](std::size_t m) {
        double sup = 0.0;
        for (std::size_t i = 0; i <= N; ++i) sup = std::max(sup, euclidean_norm(sol.y(m, i)));
        double qz = 0.0, qu = 0.0, f0_int = 0.0;
        std::vector<double> f0(sol.d);
        for (std::size_t i = 0; i < N; ++i) {
            const double dt = grid.dt(i);
            const double nz = euclidean_norm(sol.z(m, i));
            const double nu = lnu_norm(sol.u(m, i), sol.intensities);
            qz += nz * nz * dt;
            qu += nu * nu * dt;
            spec.f0(grid.node(i), PathContext{m, i}, f0);
            f0_int += euclidean_norm(f0) * dt;
        }
        r.sup_abs_y[m] = sup;
        r.sp_terms[m] = std::pow(sup, p);
        r.lpw_terms[m] = std::pow(qz, p / 2.0);
        r.lpn_terms[m] = std::pow(qu, p / 2.0);
        f0_terms[m] = std::pow(f0_int, p);
    });
    const auto a = mean_estimate(r.sp_terms);
    const auto b = mean_estimate(r.lpw_terms);
    const auto c = mean_estimate(r.lpn_terms);
    r.sp = std::pow(a.mean, 1.0 / p);
    r.lpw = std::pow(b.mean, 1.0 / p);
    r.lpn = std::pow(c.mean, 1.0 / p);
    r.i_f0 = std::pow(mean_estimate(f0_terms).mean, 1.0 / p);
    r.sp_se = a.se;
    r.lpw_se = b.se;
    r.lpn_se = c.se;
    return r;
}

/// (||Z||^p + ||U||^p) / (||Y||_S^p + rho-term + I_{|f0|}^p), constants dropped.
/// rho-term: E[rho(sup|Y|^2)^{p/2}] for p >= 2, E[sum_i alpha(t_i) rho(|Y_i|^p) dt_i] for p < 2.
struct ZuRatio {
    double numerator = 0.0;
    double denominator = 0.0;
    double ratio = 0.0;
    bool zero_data = false;
};

inline ZuRatio zu_controlled_by_y(const BsdeSolution& sol, const GeneratorSpec& spec, double p) {
    const NormReport n = estimate_norms(sol, spec, p);
    const std::size_t M = sol.paths;
    std::vector<double> rho_terms(M);
    parallel_for(M, [&](std::size_t m) {
        if (p >= 2.0) {
            const double s = n.sup_abs_y[m];
            rho_terms[m] = std::pow(spec.rho(s * s), p / 2.0);
            return;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < sol.steps(); ++i) {
            const double t = sol.grid.node(i);
            acc += spec.coefficients.alpha(t) * spec.rho(std::pow(euclidean_norm(sol.y(m, i)), p)) * sol.grid.dt(i);
        }
        rho_terms[m] = acc;
    });
    ZuRatio z;
    z.numerator = std::pow(n.lpw, p) + std::pow(n.lpn, p);
    z.denominator = std::pow(n.sp, p) + mean_estimate(rho_terms).mean + std::pow(n.i_f0, p);
    if (z.denominator == 0.0) {
        z.zero_data = true;
        z.ratio = 0.0;
    } else {
        z.ratio = z.numerator / z.denominator;
    }
    return z;
}

/// Paired check that column(next) <= column(prev) within `slack_se` standard errors
/// of the per-path difference.
struct PairedVerdict {
    double mean_increase = 0.0;
    double se = 0.0;
    bool pass = true;
};

inline PairedVerdict paired_nonincreasing(std::span<const double> prev, std::span<const double> next,
                                          double slack_se) {
    std::vector<double> diff(prev.size());
    for (std::size_t m = 0; m < prev.size(); ++m) diff[m] = next[m] - prev[m];
    const auto e = mean_estimate(diff);
    return {e.mean, e.se, e.mean <= slack_se * e.se};
}

struct SweepRow {
    double epsilon = 1.0;
    NormReport norms;
    ZuRatio zu;
    bool sp_ok = true;
    bool lpw_ok = true;
    bool lpn_ok = true;
};

struct SweepReport {
    double p = 2.0;
    double slack_se = 2.0;
    std::vector<SweepRow> rows;
    bool zero_row_exact = true;
    double max_zu_ratio = 0.0;
    bool zu_bounded = true;
    bool pass = true;
};

/// Solves (eps xi, (f - f0) + eps f0) for each eps on one ensemble and checks that
/// the three norm columns shrink with eps, that eps = 0 gives exactly zero, and
/// that the Z/U-over-Y ratio stays finite.
inline SweepReport stability_sweep(const GeneratorSpec& spec, const TerminalCondition& xi, const PathEnsemble& ens,
                                   const SchemeConfig& cfg, std::span<const double> scales, double p = 2.0,
                                   double slack_se = 2.0) {
    if (scales.empty()) throw ValidationError("stability_sweep: need at least one scale");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] >= 0.0) || !std::isfinite(scales[i])) {
            throw ValidationError("stability_sweep: scales must be finite and >= 0");
        }
        if (i > 0 && !(scales[i] < scales[i - 1])) {
            throw ValidationError("stability_sweep: scales must be strictly decreasing");
        }
    }
    const auto base = xi.evaluate(ens);
    SweepReport rep;
    rep.p = p;
    rep.slack_se = slack_se;
    for (double eps : scales) {
        std::vector<double> values(base);
        if (eps != 1.0) {
            for (double& v : values) v *= eps;
        }
        const GeneratorSpec scaled = with_scaled_f0(spec, eps);
        const BsdeSolution sol = solve_bsde(scaled, values, ens, cfg, {}, xi.id);
        SweepRow row;
        row.epsilon = eps;
        row.norms = estimate_norms(sol, scaled, p);
        row.zu = zu_controlled_by_y(sol, scaled, p);
        if (eps == 0.0) {
            const bool zero = std::all_of(sol.Y.begin(), sol.Y.end(), [](double v) { return v == 0.0; }) &&
                              std::all_of(sol.Z.begin(), sol.Z.end(), [](double v) { return v == 0.0; }) &&
                              std::all_of(sol.U.begin(), sol.U.end(), [](double v) { return v == 0.0; });
            rep.zero_row_exact = rep.zero_row_exact && zero;
        }
        if (!rep.rows.empty()) {
            const auto& prev = rep.rows.back().norms;
            row.sp_ok = paired_nonincreasing(prev.sp_terms, row.norms.sp_terms, slack_se).pass;
            row.lpw_ok = paired_nonincreasing(prev.lpw_terms, row.norms.lpw_terms, slack_se).pass;
            row.lpn_ok = paired_nonincreasing(prev.lpn_terms, row.norms.lpn_terms, slack_se).pass;
        }
        if (!row.zu.zero_data) {
            rep.max_zu_ratio = std::max(rep.max_zu_ratio, row.zu.ratio);
            rep.zu_bounded = rep.zu_bounded && std::isfinite(row.zu.ratio);
        }
        rep.pass = rep.pass && row.sp_ok && row.lpw_ok && row.lpn_ok;
        rep.rows.push_back(std::move(row));
    }
    rep.pass = rep.pass && rep.zero_row_exact && rep.zu_bounded;
    return rep;
}

/// Norm distances between two solutions on the same grid.
struct SolutionDistance {
    double sp = 0.0;
    double lpw = 0.0;
    double lpn = 0.0;
};

inline SolutionDistance solution_distance(const BsdeSolution& a, const BsdeSolution& b, double p) {
    if (a.paths != b.paths || !(a.grid == b.grid) || a.d != b.d || a.Z.size() != b.Z.size() ||
        a.U.size() != b.U.size()) {
        throw ValidationError("solution_distance: solutions have different shapes");
    }
    const std::size_t M = a.paths;
    const std::size_t N = a.steps();
    std::vector<double> ys(M), zs(M), us(M);
    parallel_for(M, [&](std::size_t m) {
        double sup = 0.0, qz = 0.0, qu = 0.0;
        std::vector<double> tmp;
        auto gap = [&](std::span<const double> x, std::span<const double> y) {
            tmp.resize(x.size());
            for (std::size_t c = 0; c < x.size(); ++c) tmp[c] = x[c] - y[c];
            return std::span<const double>(tmp);
        };
        for (std::size_t i = 0; i <= N; ++i) sup = std::max(sup, euclidean_norm(gap(a.y(m, i), b.y(m, i))));
        for (std::size_t i = 0; i < N; ++i) {
            const double dt = a.grid.dt(i);
            const double nz = euclidean_norm(gap(a.z(m, i), b.z(m, i)));
            const double nu = lnu_norm(gap(a.u(m, i), b.u(m, i)), a.intensities);
            qz += nz * nz * dt;
            qu += nu * nu * dt;
        }
        ys[m] = std::pow(sup, p);
        zs[m] = std::pow(qz, p / 2.0);
        us[m] = std::pow(qu, p / 2.0);
    });
    return {std::pow(mean_estimate(ys).mean, 1.0 / p), std::pow(mean_estimate(zs).mean, 1.0 / p),
            std::pow(mean_estimate(us).mean, 1.0 / p)};
}

struct TruncationRow {
    double level = 0.0;
    bool inactive_level = false;
    SolutionDistance distance;
    bool ok = true;
};

struct TruncationReport {
    double p = 2.0;
    double r = 1.0;
    double psi_sup = 0.0;
    std::vector<TruncationRow> rows;
    bool inactive_zero = true;
    bool pass = true;
};

/// Solves (c_n(xi), f_n) for each level and compares with the untruncated solution.
/// An extra level at which every truncation is inactive is appended; its distance
/// must be exactly zero. psi_{r+1} is estimated with check_growth unless supplied.
inline TruncationReport truncation_convergence_study(const GeneratorSpec& spec, const TerminalCondition& xi,
                                                     const PathEnsemble& ens, const SchemeConfig& cfg,
                                                     std::span<const double> levels, double r, double p = 2.0,
                                                     std::optional<GrowthEstimate> psi = std::nullopt,
                                                     const SamplerConfig& sampler = {}) {
    if (!(r > 0.0)) throw ValidationError("truncation study: radius r must be > 0");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0) || !std::isfinite(levels[i])) {
            throw ValidationError("truncation study: levels must be finite and > 0");
        }
        if (i > 0 && !(levels[i] > levels[i - 1])) throw ValidationError("truncation study: levels must increase");
    }
    const auto& nodes = ens.grid().nodes();
    if (!psi) psi = check_growth(spec, r + 1.0, nodes, sampler);
    const GrowthEstimate growth = *psi;

    const auto xi_values = xi.evaluate(ens);
    const BsdeSolution reference = solve_bsde(spec, xi_values, ens, cfg, {}, xi.id);

    TruncationReport rep;
    rep.p = p;
    rep.r = r;
    double sup = 1.0;
    for (double v : growth.psi) {
        if (!std::isfinite(v)) throw NumericError("truncation study: psi_{r+1} estimate is not finite");
        sup = std::max(sup, v);
        rep.psi_sup = std::max(rep.psi_sup, v);
    }
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        sup = std::max(sup, euclidean_norm(std::span<const double>(xi_values).subspan(m * spec.d, spec.d)));
        for (std::size_t i = 0; i < ens.steps(); ++i) {
            sup = std::max(sup, euclidean_norm(reference.z(m, i)));
            sup = std::max(sup, lnu_norm(reference.u(m, i), reference.intensities));
        }
    }
    const double inactive = 2.0 * std::ceil(sup);

    std::vector<std::pair<double, bool>> all;
    for (double n : levels) all.emplace_back(n, false);
    if (all.empty() || all.back().first < inactive) all.emplace_back(inactive, true);
    else all.back().second = true;

    PsiFn psi_fn = [growth](double t) { return growth(t); };
    for (const auto& [n, is_inactive] : all) {
        const GeneratorSpec fn = build_fn(spec, r, n, psi_fn);
        const auto cut = truncate_terminal(xi_values, spec.d, n);
        const BsdeSolution sol = solve_bsde(fn, cut, ens, cfg, {}, xi.id);
        TruncationRow row;
        row.level = n;
        row.inactive_level = is_inactive && n >= inactive;
        row.distance = solution_distance(sol, reference, p);
        if (!rep.rows.empty()) {
            const auto& prev = rep.rows.back().distance;
            row.ok = row.distance.sp <= prev.sp && row.distance.lpw <= prev.lpw && row.distance.lpn <= prev.lpn;
        }
        if (row.inactive_level) {
            rep.inactive_zero = row.distance.sp == 0.0 && row.distance.lpw == 0.0 && row.distance.lpn == 0.0;
        }
        rep.pass = rep.pass && row.ok;
        rep.rows.push_back(row);
    }
    rep.pass = rep.pass && rep.inactive_zero;
    return rep;
}

/// E|V_n|^p and E[rho(|V_n|^2)^{p/2}] for V_n = xi / n, n = 1, 2, 4, ..., 2^K.
struct UniformIntegrabilityReport {
    double p = 2.0;
    double threshold = 1e-3;
    std::vector<double> n;
    std::vector<double> moment;
    std::vector<double> rho_moment;
    bool moment_ok = true;
    bool rho_ok = true;
    bool pass = true;
};

/// xi holds samples stored paths x d. Each sequence passes when it is nonincreasing
/// and its last entry is at most threshold times its first.
inline UniformIntegrabilityReport uniform_integrability_check(const RhoFunction& rho, double p,
                                                              std::span<const double> xi, std::size_t d,
                                                              unsigned K = 6, double threshold = 1e-3) {
    if (!(p > 0.0)) throw ValidationError("uniform_integrability_check: p must be > 0");
    if (d == 0 || xi.size() % d != 0 || xi.empty()) {
        throw ValidationError("uniform_integrability_check: samples must be a non-empty paths x d array");
    }
    const std::size_t M = xi.size() / d;
    UniformIntegrabilityReport rep;
    rep.p = p;
    rep.threshold = threshold;
    for (unsigned j = 0; j <= K; ++j) {
        const double n = std::ldexp(1.0, static_cast<int>(j));
        double a = 0.0, b = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double v = euclidean_norm(xi.subspan(m * d, d)) / n;
            a += std::pow(v, p);
            b += std::pow(rho(v * v), p / 2.0);
        }
        rep.n.push_back(n);
        rep.moment.push_back(a / static_cast<double>(M));
        rep.rho_moment.push_back(b / static_cast<double>(M));
    }
    auto verdict = [&](const std::vector<double>& s) {
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (s[i] > s[i - 1]) return false;
        }
        return s.back() <= threshold * s.front();
    };
    rep.moment_ok = verdict(rep.moment);
    rep.rho_ok = verdict(rep.rho_moment);
    rep.pass = rep.moment_ok && rep.rho_ok;
    return rep;
}

struct UniquenessReport {
    double delta = 0.0;
    double max_abs_diff = 0.0;
    double tolerance = 0.0;
    bool bit_identical = false;
    bool pass = false;
};

/// Solves twice: once as usual, once starting every implicit solve from the first
/// solution plus delta-scaled Gaussian noise. delta = 0 reruns unchanged and must be
/// bit-identical; otherwise max |Y - Y'| must stay within 10 implicit tolerances.
inline UniquenessReport uniqueness_perturbation(const GeneratorSpec& spec, const TerminalCondition& xi,
                                                const PathEnsemble& ens, const SchemeConfig& cfg, double delta,
                                                std::uint64_t noise_seed = 7) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("uniqueness_perturbation: delta must be >= 0");
    const BsdeSolution first = solve_bsde(spec, xi, ens, cfg);
    InitialGuessFn guess;
    if (delta > 0.0) {
        guess = [&first, delta, noise_seed](std::size_t m, std::size_t i, std::span<double> y) {
            StreamRng rng(noise_seed, m, i, kSamplerTag + 1);
            const auto base = first.y(m, i);
            for (std::size_t c = 0; c < y.size(); ++c) y[c] = base[c] + delta * rng.normal();
        };
    }
    const BsdeSolution second = solve_bsde(spec, xi, ens, cfg, guess);
    UniquenessReport rep;
    rep.delta = delta;
    rep.tolerance = 10.0 * cfg.tolerance;
    for (std::size_t i = 0; i < first.Y.size(); ++i) {
        rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(first.Y[i] - second.Y[i]));
    }
    rep.bit_identical = first.bitwise_equal(second);
    rep.pass = delta == 0.0 ? rep.bit_identical : rep.max_abs_diff <= rep.tolerance;
    return rep;
}

}  // namespace levy_bsde
