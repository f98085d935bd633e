#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/generator.hpp"

namespace levy_bsde {

using PsiFn = std::function<double(double)>;

/// Smooth cut-off: 1 on |y| <= r, 0 on |y| >= r + 1, joined by the quintic
/// smoothstep s(w) = 1 - w^3 (10 - 15 w + 6 w^2), w = |y| - r. C^2, Lipschitz 15/8.
inline double theta_r(std::span<const double> y, double r) {
    if (!(r > 0.0)) throw ValidationError("theta_r: r must be > 0");
    const double w = euclidean_norm(y) - r;
    if (w <= 0.0) return 1.0;
    if (w >= 1.0) return 0.0;
    return 1.0 - w * w * w * (10.0 - 15.0 * w + 6.0 * w * w);
}

inline double theta_r(double y, double r) { return theta_r(std::span<const double>(&y, 1), r); }

inline constexpr double kThetaLipschitz = 15.0 / 8.0;

/// Norm used by project_ball: Euclidean, or L^2(nu) with the given intensities.
struct BallNorm {
    std::span<const double> intensities{};
    bool lnu = false;

    static BallNorm euclidean() { return {}; }
    static BallNorm l2_nu(std::span<const double> lambdas) { return {lambdas, true}; }

    double operator()(std::span<const double> v) const {
        return lnu ? lnu_norm(v, intensities) : euclidean_norm(v);
    }
};

/// Writes n v / (|v| v n) into out. Returns false (and copies v unchanged) when |v| <= n.
inline bool project_ball_into(std::span<const double> v, double n, const BallNorm& norm, std::span<double> out) {
    if (!(n > 0.0)) throw ValidationError("project_ball: radius must be > 0");
    const double len = norm(v);
    if (len <= n) {
        std::copy(v.begin(), v.end(), out.begin());
        return false;
    }
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = n * v[i] / len;
    return true;
}

inline std::vector<double> project_ball(std::span<const double> v, double n,
                                        const BallNorm& norm = BallNorm::euclidean()) {
    std::vector<double> out(v.size());
    project_ball_into(v, n, norm, out);
    return out;
}

namespace detail {

/// h_n when use_theta, f_n otherwise. When every truncation is inactive the
/// original f is called directly so the arithmetic is identical to f.
inline GeneratorSpec build_truncated(const GeneratorSpec& spec, double r, double n, PsiFn psi, bool use_theta) {
    spec.validate();
    if (!(n > 0.0)) throw ValidationError("truncated generator: level n must be > 0");
    if (use_theta && !(r > 0.0)) throw ValidationError("truncated generator: radius r must be > 0");
    if (!psi) throw ValidationError("truncated generator: psi_{r+1} must be supplied");
    GeneratorSpec out = spec;
    out.id = spec.id + (use_theta ? "/h_n" : "/f_n");
    out.eval = [base = spec, r, n, psi = std::move(psi), use_theta](const GeneratorArgs& a, std::span<double> res) {
        const std::size_t d = base.d;
        const double theta = use_theta ? theta_r(a.y, r) : 1.0;
        std::vector<double> f0(d);
        base.f0(a.t, a.ctx, f0);
        if (theta == 0.0) {
            std::copy(f0.begin(), f0.end(), res.begin());
            return;
        }
        std::vector<double> z(a.z.size()), u(a.u.size());
        const bool z_cut = project_ball_into(a.z, n, BallNorm::euclidean(), z);
        const bool u_cut = a.u.empty() ? false : project_ball_into(a.u, n, BallNorm::l2_nu(base.intensities), u);
        const double damping = n / std::max(psi(a.t), n);
        if (theta == 1.0 && damping == 1.0 && !z_cut && !u_cut) {
            base.eval(a, res);
            return;
        }
        base.eval(GeneratorArgs{a.t, a.y, z, u, a.ctx}, res);
        for (std::size_t c = 0; c < d; ++c) res[c] = theta * (res[c] - f0[c]) * damping + f0[c];
    };
    return out;
}

}  // namespace detail

/// h_n(t,y,z,u) = theta_r(y) (f(t,y,c_n(z),c~_n(u)) - f0(t)) n / (psi_{r+1}(t) v n) + f0(t)
inline GeneratorSpec build_hn(const GeneratorSpec& spec, double r, double n, PsiFn psi) {
    return detail::build_truncated(spec, r, n, std::move(psi), true);
}

/// f_n(t,y,z,u) = (f(t,y,c_n(z),c~_n(u)) - f0(t)) n / (psi_{r+1}(t) v n) + f0(t)
inline GeneratorSpec build_fn(const GeneratorSpec& spec, double r, double n, PsiFn psi) {
    return detail::build_truncated(spec, r, n, std::move(psi), false);
}

/// Path-wise c_n on terminal samples stored as paths x d.
inline std::vector<double> truncate_terminal(std::span<const double> xi, std::size_t d, double n) {
    if (d == 0 || xi.size() % d != 0) throw ValidationError("truncate_terminal: size must be a multiple of d");
    std::vector<double> out(xi.size());
    for (std::size_t m = 0; m < xi.size() / d; ++m) {
        project_ball_into(xi.subspan(m * d, d), n, BallNorm::euclidean(), std::span<double>(out).subspan(m * d, d));
    }
    return out;
}

}  // namespace levy_bsde
