#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/generator.hpp"
#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/path_ensemble.hpp"
#include "levy_bsde/rho.hpp"
#include "levy_bsde/terminal.hpp"

namespace levy_bsde {

using Params = std::map<std::string, double>;

namespace detail {

/// Reads named parameters with defaults and rejects any key it was not asked about.
class ParamReader {
public:
    ParamReader(std::string owner, const Params& params) : owner_(std::move(owner)), params_(params) {}

    double get(const std::string& key, double fallback) {
        used_.insert(key);
        const auto it = params_.find(key);
        if (it == params_.end()) return fallback;
        if (!std::isfinite(it->second)) throw ValidationError(owner_ + ": parameter '" + key + "' must be finite");
        return it->second;
    }

    void finish() const {
        for (const auto& [key, value] : params_) {
            if (!used_.count(key)) throw ValidationError(owner_ + ": unknown parameter '" + key + "'");
        }
    }

private:
    std::string owner_;
    const Params& params_;
    std::set<std::string> used_;
};

inline void require_scalar(const std::string& id, const LevyModel& model) {
    if (model.d != 1) throw ValidationError("generator " + id + " is defined for d = 1 only");
}

/// sum_l z_{c,l}
inline double z_row_sum(std::span<const double> z, std::size_t c, std::size_t k) {
    double s = 0.0;
    for (std::size_t l = 0; l < k; ++l) s += z[c * k + l];
    return s;
}

/// sum_j lambda_j u_{j,c}
inline double jump_sum(std::span<const double> u, std::span<const double> lambdas, std::size_t c, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < lambdas.size(); ++j) s += lambdas[j] * u[j * d + c];
    return s;
}

inline double y_log_abs_y(double y) { return y == 0.0 ? 0.0 : y * std::log(std::abs(y)); }

inline GeneratorSpec skeleton(const std::string& id, const LevyModel& model, double f0) {
    GeneratorSpec s;
    s.id = id;
    s.d = model.d;
    s.k = model.k;
    s.intensities = model.intensities();
    s.f0 = [f0](double, PathContext, std::span<double> out) { std::fill(out.begin(), out.end(), f0); };
    s.rho = RhoFunction::linear(1.0);
    return s;
}

}  // namespace detail

/// Built-in generators; `params` overrides the documented defaults.
///   zero                 f = 0
///   constant             f = value
///   linear_drift         f = -a y + b sum_l z_l + c sum_j lambda_j u_j + f0
///   ylogy_osgood         f = -y log|y| + c_z sum_l z_l + c_u sum_j lambda_j u_j + f0       (d = 1)
///   quadratic            f = y^2                                                          (d = 1)
///   jump_linear          f = weight sum_j lambda_j u_j                                    (d = 1)
///   showcase_simplified  f = -t^{-1/2} y log|y| - mu0 (y^3 + y^{1/3}) + b1 (z + sin z cos y)
///                            + b2 sum_j lambda_j kappa_j (atan(y kappa_j u_j) + u_j) + f0  (d = 1)
inline GeneratorSpec make_generator(const std::string& id, const LevyModel& model, const Params& params = {},
                                    double p = 2.0) {
    model.validate();
    detail::ParamReader in("generator " + id, params);
    const std::size_t d = model.d;
    const std::size_t k = model.k;
    const double sqrt_k = std::sqrt(static_cast<double>(k));
    const double sqrt_lambda = std::sqrt(model.total_intensity());
    GeneratorSpec s;

    if (id == "zero") {
        s = detail::skeleton(id, model, 0.0);
        s.eval = [](const GeneratorArgs&, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
        s.y_dependent = false;
    } else if (id == "constant") {
        const double value = in.get("value", 1.0);
        s = detail::skeleton(id, model, value);
        s.eval = [value](const GeneratorArgs&, std::span<double> out) { std::fill(out.begin(), out.end(), value); };
        s.y_dependent = false;
    } else if (id == "linear_drift") {
        const double a = in.get("a", 1.0);
        const double b = in.get("b", 0.0);
        const double c = in.get("c", 0.0);
        const double f0 = in.get("f0", 0.0);
        s = detail::skeleton(id, model, f0);
        s.eval = [a, b, c, f0, d, k, lambdas = s.intensities](const GeneratorArgs& g, std::span<double> out) {
            for (std::size_t i = 0; i < d; ++i) {
                out[i] = -a * g.y[i] + b * detail::z_row_sum(g.z, i, k) + c * detail::jump_sum(g.u, lambdas, i, d) + f0;
            }
        };
        s.coefficients.mu = constant_coefficient(-a);
        s.coefficients.beta = constant_coefficient(std::abs(b) * sqrt_k + std::abs(c) * sqrt_lambda);
        s.coefficients.beta1 = constant_coefficient(std::abs(b) * sqrt_k);
        s.coefficients.beta2 = constant_coefficient(std::abs(c) * sqrt_lambda);
        s.y_dependent = a != 0.0;
    } else if (id == "ylogy_osgood") {
        detail::require_scalar(id, model);
        const double cz = in.get("c_z", 0.0);
        const double cu = in.get("c_u", 0.0);
        const double f0 = in.get("f0", 0.0);
        s = detail::skeleton(id, model, f0);
        s.eval = [cz, cu, f0, k, lambdas = s.intensities](const GeneratorArgs& g, std::span<double> out) {
            out[0] = -detail::y_log_abs_y(g.y[0]) + cz * detail::z_row_sum(g.z, 0, k) +
                     cu * detail::jump_sum(g.u, lambdas, 0, 1) + f0;
        };
        s.coefficients.alpha = constant_coefficient(1.0);
        s.coefficients.mu = constant_coefficient(1.0);
        s.coefficients.beta = constant_coefficient(std::abs(cz) * sqrt_k + std::abs(cu) * sqrt_lambda);
        s.coefficients.beta1 = constant_coefficient(std::abs(cz) * sqrt_k);
        s.coefficients.beta2 = constant_coefficient(std::abs(cu) * sqrt_lambda);
        s.rho = RhoFunction::log_osgood(1.0);
    } else if (id == "quadratic") {
        detail::require_scalar(id, model);
        s = detail::skeleton(id, model, 0.0);
        s.eval = [](const GeneratorArgs& g, std::span<double> out) { out[0] = g.y[0] * g.y[0]; };
        s.coefficients.mu = constant_coefficient(1.0);
    } else if (id == "jump_linear") {
        detail::require_scalar(id, model);
        const double w = in.get("weight", 1.0);
        s = detail::skeleton(id, model, 0.0);
        s.eval = [w, lambdas = s.intensities](const GeneratorArgs& g, std::span<double> out) {
            out[0] = w * detail::jump_sum(g.u, lambdas, 0, 1);
        };
        s.coefficients.beta = constant_coefficient(std::abs(w) * sqrt_lambda);
        s.coefficients.beta2 = constant_coefficient(std::abs(w) * sqrt_lambda);
        s.y_dependent = false;
    } else if (id == "showcase_simplified") {
        detail::require_scalar(id, model);
        if (k > 1) throw ValidationError("generator showcase_simplified needs k <= 1");
        const double mu0 = in.get("mu0", 1.0);
        const double b1 = in.get("b1", 0.5);
        const double b2 = in.get("b2", 0.5);
        const double f0 = in.get("f0", 0.0);
        const double t_min = in.get("t_min", 0.005);
        if (!(t_min > 0.0)) throw ValidationError("generator showcase_simplified: t_min must be > 0");
        std::vector<double> kappa;
        double weighted = 0.0;
        for (const auto& atom : model.atoms) {
            kappa.push_back(std::min(1.0, euclidean_norm(atom.mark)));
            weighted += atom.intensity * kappa.back() * kappa.back();
        }
        s = detail::skeleton(id, model, f0);
        s.eval = [=, lambdas = s.intensities](const GeneratorArgs& g, std::span<double> out) {
            const double y = g.y[0];
            const double z = k == 1 ? g.z[0] : 0.0;
            double jump = 0.0;
            for (std::size_t j = 0; j < lambdas.size(); ++j) {
                jump += lambdas[j] * kappa[j] * (std::atan(y * kappa[j] * g.u[j]) + g.u[j]);
            }
            out[0] = -detail::y_log_abs_y(y) / std::sqrt(std::max(g.t, t_min)) - mu0 * (y * y * y + std::cbrt(y)) +
                     b1 * (z + std::sin(z) * std::cos(y)) + b2 * jump + f0;
        };
        // Nominal coefficients; they are not certified by the checkers.
        s.coefficients.alpha = [t_min](double t) { return 1.0 / std::sqrt(std::max(t, t_min)); };
        s.coefficients.mu = [t_min, b1](double t) { return 1.0 / std::sqrt(std::max(t, t_min)) + std::abs(b1); };
        s.coefficients.beta = constant_coefficient(2.0 * std::abs(b1) + 2.0 * std::abs(b2) * std::sqrt(weighted));
        s.coefficients.beta1 = constant_coefficient(2.0 * std::abs(b1));
        s.coefficients.beta2 = constant_coefficient(2.0 * std::abs(b2) * std::sqrt(weighted));
        s.rho = RhoFunction::log_osgood(1.0);
    } else {
        throw ValidationError("unknown generator '" + id + "'");
    }
    in.finish();
    s.p = p;
    s.validate();
    return s;
}

/// Built-in terminal conditions, each followed by `shift + scale * xi`.
///   constant        value
///   brownian        W_T (component c uses W^{c mod k})
///   abs_brownian    |W_T|
///   brownian_min0   min(W_T, 0)
///   brownian_max0   max(W_T, 0)
///   state           X_T
///   jump_indicator  1 if atom `atom` fired on [0, T], else 0
inline TerminalCondition make_terminal(const std::string& id, const LevyModel& model, const Params& params = {}) {
    detail::ParamReader in("terminal " + id, params);
    const std::size_t d = model.d;
    const std::size_t k = model.k;
    TerminalCondition xi;
    xi.id = id;
    xi.d = d;
    auto needs_brownian = [&] {
        if (k == 0) throw ValidationError("terminal " + id + " needs a Brownian component (k >= 1)");
    };
    auto from_w = [&](std::function<double(double)> g) {
        needs_brownian();
        return [g = std::move(g), k](const PathEnsemble& e, std::size_t m, std::span<double> out) {
            const auto w = e.brownian(m, e.steps());
            for (std::size_t c = 0; c < out.size(); ++c) out[c] = g(w[c % k]);
        };
    };
    if (id == "constant") {
        const double value = in.get("value", 0.0);
        xi.fn = [value](const PathEnsemble&, std::size_t, std::span<double> out) {
            std::fill(out.begin(), out.end(), value);
        };
    } else if (id == "brownian") {
        xi.fn = from_w([](double w) { return w; });
    } else if (id == "abs_brownian") {
        xi.fn = from_w([](double w) { return std::abs(w); });
    } else if (id == "brownian_min0") {
        xi.fn = from_w([](double w) { return std::min(w, 0.0); });
    } else if (id == "brownian_max0") {
        xi.fn = from_w([](double w) { return std::max(w, 0.0); });
    } else if (id == "state") {
        xi.fn = [](const PathEnsemble& e, std::size_t m, std::span<double> out) {
            const auto x = e.state(m, e.steps());
            std::copy(x.begin(), x.end(), out.begin());
        };
    } else if (id == "jump_indicator") {
        const double atom_param = in.get("atom", 0.0);
        if (!(atom_param >= 0.0) || atom_param != std::floor(atom_param) ||
            atom_param >= static_cast<double>(model.atom_count())) {
            throw ValidationError("terminal jump_indicator: 'atom' must index an atom of the model");
        }
        const auto j = static_cast<std::size_t>(atom_param);
        xi.fn = [j](const PathEnsemble& e, std::size_t m, std::span<double> out) {
            std::uint64_t fired = 0;
            for (std::size_t i = 0; i < e.steps(); ++i) fired += e.counts(m, i)[j];
            std::fill(out.begin(), out.end(), fired > 0 ? 1.0 : 0.0);
        };
    } else {
        throw ValidationError("unknown terminal '" + id + "'");
    }
    const double scale = in.get("scale", 1.0);
    const double shift = in.get("shift", 0.0);
    in.finish();
    return affine(std::move(xi), scale, shift);
}

inline RhoFunction make_rho(const std::string& family, const Params& params = {}) {
    detail::ParamReader in("rho " + family, params);
    RhoFunction rho = RhoFunction::linear(1.0);
    if (family == "linear") {
        rho = RhoFunction::linear(in.get("L", 1.0));
    } else if (family == "log_osgood") {
        rho = RhoFunction::log_osgood(in.get("x_star", 1.0));
    } else {
        throw ValidationError("unknown rho family '" + family + "'");
    }
    in.finish();
    return rho;
}

/// Sorted "generator <id>", "rho <id>", "terminal <id>" lines containing `filter`.
inline std::vector<std::string> list_registry(const std::string& filter = "") {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> kinds = {
        {"generator",
         {"constant", "jump_linear", "linear_drift", "quadratic", "showcase_simplified", "ylogy_osgood", "zero"}},
        {"rho", {"linear", "log_osgood"}},
        {"terminal",
         {"abs_brownian", "brownian", "brownian_max0", "brownian_min0", "constant", "jump_indicator", "state"}},
    };
    std::vector<std::string> out;
    for (const auto& [kind, ids] : kinds) {
        for (const auto& id : ids) {
            std::string line = kind + " " + id;
            if (line.find(filter) != std::string::npos) out.push_back(std::move(line));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace levy_bsde
