#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/rho.hpp"

namespace levy_bsde {

/// Identifies where a generator is evaluated; lets path-dependent
/// generators look up their own state.
struct PathContext {
    std::size_t path = 0;
    std::size_t step = 0;
};

/// Arguments of f(t, y, z, u). z is d x k row-major, u is atoms x d (atom-major).
struct GeneratorArgs {
    double t = 0.0;
    std::span<const double> y;
    std::span<const double> z;
    std::span<const double> u;
    PathContext ctx{};
};

using GeneratorFn = std::function<void(const GeneratorArgs&, std::span<double>)>;
using F0Fn = std::function<void(double, PathContext, std::span<double>)>;
using CoefficientFn = std::function<double(double)>;

inline CoefficientFn constant_coefficient(double c) {
    return [c](double) { return c; };
}

/// Declared coefficients of the monotonicity and growth conditions.
/// p >= 2 uses beta; p < 2 uses beta1, beta2 and q.
struct DeclaredCoefficients {
    CoefficientFn alpha = constant_coefficient(0.0);
    CoefficientFn mu = constant_coefficient(0.0);
    CoefficientFn beta = constant_coefficient(0.0);
    CoefficientFn beta1 = constant_coefficient(0.0);
    CoefficientFn beta2 = constant_coefficient(0.0);
    double q = 2.0;
};

/// L^2(nu) norm of a per-atom vector: sqrt(sum_j lambda_j |u_j|^2), u atom-major.
inline double lnu_norm(std::span<const double> u, std::span<const double> intensities) {
    const std::size_t atoms = intensities.size();
    if (atoms == 0) {
        if (!u.empty()) throw ValidationError("lnu_norm: u has entries but the model has no atoms");
        return 0.0;
    }
    if (u.size() % atoms != 0) throw ValidationError("lnu_norm: u length must be a multiple of the atom count");
    const std::size_t d = u.size() / atoms;
    double s = 0.0;
    for (std::size_t j = 0; j < atoms; ++j) {
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) sq += u[j * d + c] * u[j * d + c];
        s += intensities[j] * sq;
    }
    return std::sqrt(s);
}

inline double lnu_norm(std::span<const double> u, const LevyModel& model) {
    if (u.size() != model.atom_count() * model.d) {
        throw ValidationError("lnu_norm: u length " + std::to_string(u.size()) + " does not match atoms x d = " +
                              std::to_string(model.atom_count() * model.d));
    }
    const auto lambdas = model.intensities();
    return lnu_norm(u, lambdas);
}

/// A generator f together with the coefficients it claims to satisfy.
struct GeneratorSpec {
    std::string id;
    double p = 2.0;
    std::size_t d = 1;
    std::size_t k = 0;
    std::vector<double> intensities;  // one per atom; defines L^2(nu)
    GeneratorFn eval;
    F0Fn f0;
    DeclaredCoefficients coefficients;
    RhoFunction rho;
    /// False when f does not depend on y; the backward step is then explicit.
    bool y_dependent = true;

    std::size_t atom_count() const noexcept { return intensities.size(); }
    std::size_t z_size() const noexcept { return d * k; }
    std::size_t u_size() const noexcept { return atom_count() * d; }

    /// The Phi of the growth condition: beta, or beta1 + beta2 below p = 2.
    double phi(double t) const {
        return p >= 2.0 ? coefficients.beta(t) : coefficients.beta1(t) + coefficients.beta2(t);
    }

    void validate() const {
        if (!(p > 1.0)) throw ValidationError("generator " + id + ": p must be > 1");
        if (d == 0) throw ValidationError("generator " + id + ": d must be positive");
        if (!eval || !f0) throw ValidationError("generator " + id + ": eval and f0 must be set");
        if (p < 2.0 && !(coefficients.q >= 2.0)) {
            throw ValidationError("generator " + id + ": q must be >= 2 for the p < 2 branch");
        }
        for (double l : intensities) {
            if (!(l > 0.0)) throw ValidationError("generator " + id + ": intensities must be positive");
        }
    }

    void check_model(const LevyModel& model) const {
        if (model.d != d || model.k != k || model.atom_count() != atom_count()) {
            throw ValidationError("generator " + id + ": dimensions (d, k, atoms) do not match the model");
        }
        for (std::size_t j = 0; j < atom_count(); ++j) {
            if (model.atoms[j].intensity != intensities[j]) {
                throw ValidationError("generator " + id + ": atom intensities do not match the model");
            }
        }
    }

    /// Evaluates f and raises EvaluationError on non-finite output.
    void evaluate(const GeneratorArgs& args, std::span<double> out) const {
        eval(args, out);
        for (double v : out) {
            if (!std::isfinite(v)) {
                throw EvaluationError("generator " + id + " returned a non-finite value at t=" +
                                      std::to_string(args.t));
            }
        }
    }

    std::vector<double> evaluate(double t, std::span<const double> y, std::span<const double> z,
                                 std::span<const double> u, PathContext ctx = {}) const {
        std::vector<double> out(d);
        evaluate(GeneratorArgs{t, y, z, u, ctx}, out);
        return out;
    }

    std::vector<double> f0_at(double t, PathContext ctx = {}) const {
        std::vector<double> out(d);
        f0(t, ctx, out);
        return out;
    }
};

/// f' = f + c (and f0' = f0 + c).
inline GeneratorSpec shifted(GeneratorSpec spec, double c) {
    if (c == 0.0) return spec;
    spec.id += "+shift";
    spec.eval = [inner = spec.eval, c](const GeneratorArgs& a, std::span<double> out) {
        inner(a, out);
        for (double& v : out) v += c;
    };
    spec.f0 = [inner = spec.f0, c](double t, PathContext ctx, std::span<double> out) {
        inner(t, ctx, out);
        for (double& v : out) v += c;
    };
    return spec;
}

/// Replaces f0 by eps * f0 while keeping f - f0: f_eps = (f - f0) + eps f0.
/// eps = 1 returns the spec untouched.
inline GeneratorSpec with_scaled_f0(GeneratorSpec spec, double eps) {
    if (eps == 1.0) return spec;
    const std::size_t d = spec.d;
    spec.eval = [inner = spec.eval, f0 = spec.f0, eps, d](const GeneratorArgs& a, std::span<double> out) {
        inner(a, out);
        std::vector<double> base(d);
        f0(a.t, a.ctx, base);
        for (std::size_t c = 0; c < d; ++c) out[c] = (out[c] - base[c]) + eps * base[c];
    };
    spec.f0 = [f0 = spec.f0, eps](double t, PathContext ctx, std::span<double> out) {
        f0(t, ctx, out);
        for (double& v : out) v *= eps;
    };
    return spec;
}

}  // namespace levy_bsde
