#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/format.hpp"
#include "levy_bsde/generator.hpp"
#include "levy_bsde/parallel.hpp"
#include "levy_bsde/path_ensemble.hpp"
#include "levy_bsde/regression.hpp"
#include "levy_bsde/terminal.hpp"

namespace levy_bsde {

enum class ImplicitMethod { FixedPoint, Bisection };

struct SchemeConfig {
    unsigned basis_degree = 2;
    ImplicitMethod method = ImplicitMethod::FixedPoint;
    double damping = 1.0;
    double tolerance = 1e-12;
    unsigned max_iterations = 200;
    double ridge = 1e-10;

    void validate() const {
        if (!(damping > 0.0 && damping <= 1.0)) throw ValidationError("scheme: damping must lie in (0, 1]");
        if (!(tolerance > 0.0)) throw ValidationError("scheme: tolerance must be > 0");
        if (max_iterations == 0) throw ValidationError("scheme: max_iterations must be > 0");
        if (!(ridge >= 0.0)) throw ValidationError("scheme: ridge must be >= 0");
    }
};

struct StepDiagnostics {
    std::size_t step = 0;
    unsigned max_iterations = 0;
    std::size_t total_iterations = 0;
    std::size_t bisection_fallbacks = 0;
    std::size_t basis_size = 0;
    double condition = 1.0;
    /// Residual std of the E_i[Y_{i+1}] regression (component 0).
    double residual_std = 0.0;
    /// residual_std * sqrt(basis_size / paths): standard error of the fitted value.
    double fit_se = 0.0;
};

/// Discrete (Y, Z, U) over grid x paths.
///   Y: paths x (N+1) x d
///   Z: paths x N x (d x k)
///   U: paths x N x (atoms x d)
struct BsdeSolution {
    std::size_t paths = 0;
    std::size_t d = 1;
    std::size_t k = 0;
    TimeGrid grid;
    std::vector<double> intensities;
    std::uint64_t ensemble_fingerprint = 0;
    std::string generator_id;
    std::string terminal_id;
    std::vector<double> Y;
    std::vector<double> Z;
    std::vector<double> U;
    std::vector<StepDiagnostics> diagnostics;

    std::size_t steps() const noexcept { return grid.steps(); }
    std::size_t atoms() const noexcept { return intensities.size(); }
    std::size_t z_size() const noexcept { return d * k; }
    std::size_t u_size() const noexcept { return atoms() * d; }

    static BsdeSolution zeros(std::size_t paths, const TimeGrid& grid, std::size_t d, std::size_t k,
                              std::vector<double> intensities = {}) {
        BsdeSolution s;
        s.paths = paths;
        s.d = d;
        s.k = k;
        s.grid = grid;
        s.intensities = std::move(intensities);
        const std::size_t n = grid.steps();
        s.Y.assign(paths * (n + 1) * d, 0.0);
        s.Z.assign(paths * n * s.z_size(), 0.0);
        s.U.assign(paths * n * s.u_size(), 0.0);
        s.diagnostics.resize(n);
        for (std::size_t i = 0; i < n; ++i) s.diagnostics[i].step = i;
        return s;
    }

    std::span<double> y(std::size_t m, std::size_t i) { return {Y.data() + (m * (steps() + 1) + i) * d, d}; }
    std::span<const double> y(std::size_t m, std::size_t i) const {
        return {Y.data() + (m * (steps() + 1) + i) * d, d};
    }
    std::span<double> z(std::size_t m, std::size_t i) { return {Z.data() + (m * steps() + i) * z_size(), z_size()}; }
    std::span<const double> z(std::size_t m, std::size_t i) const {
        return {Z.data() + (m * steps() + i) * z_size(), z_size()};
    }
    std::span<double> u(std::size_t m, std::size_t i) { return {U.data() + (m * steps() + i) * u_size(), u_size()}; }
    std::span<const double> u(std::size_t m, std::size_t i) const {
        return {U.data() + (m * steps() + i) * u_size(), u_size()};
    }

    /// Standard error of the fitted conditional expectation at node i (0 at t_N).
    double fit_se(std::size_t i) const { return i < diagnostics.size() ? diagnostics[i].fit_se : 0.0; }

    bool bitwise_equal(const BsdeSolution& o) const {
        auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
            return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
                       return std::memcmp(&x, &y, sizeof x) == 0;
                   });
        };
        return same(Y, o.Y) && same(Z, o.Z) && same(U, o.U);
    }

    /// CSV `path,step,field,index,value`; Z index is c*k + l, U index is j*d + c.
    void write_csv(std::ostream& os) const {
        os << "path,step,field,index,value\n";
        std::string line;
        auto emit = [&](std::size_t m, std::size_t i, char field, std::span<const double> values) {
            for (std::size_t c = 0; c < values.size(); ++c) {
                line.clear();
                append_uint(line, m);
                line += ',';
                append_uint(line, i);
                line += ',';
                line += field;
                line += ',';
                append_uint(line, c);
                line += ',';
                append_double(line, values[c]);
                line += '\n';
                os << line;
            }
        };
        for (std::size_t m = 0; m < paths; ++m) {
            for (std::size_t i = 0; i <= steps(); ++i) {
                emit(m, i, 'Y', y(m, i));
                if (i < steps()) {
                    emit(m, i, 'Z', z(m, i));
                    emit(m, i, 'U', u(m, i));
                }
            }
        }
    }
};

/// Overrides the starting point of one implicit solve; receives the default guess.
using InitialGuessFn = std::function<void(std::size_t path, std::size_t step, std::span<double> guess)>;

struct StepResult {
    std::vector<double> Y;  // paths x d
    std::vector<double> Z;  // paths x d x k
    std::vector<double> U;  // paths x atoms x d
    StepDiagnostics diagnostics;
};

namespace detail {

struct ImplicitOutcome {
    unsigned iterations = 0;
    bool bisection = false;
};

/// Solves y = E + dt f(t, y, z, u) for one path.
class ImplicitSolve {
public:
    ImplicitSolve(const GeneratorSpec& spec, const SchemeConfig& cfg, double t, double dt,
                  std::span<const double> target, std::span<const double> z, std::span<const double> u,
                  PathContext ctx)
        : spec_(spec), cfg_(cfg), t_(t), dt_(dt), target_(target), z_(z), u_(u), ctx_(ctx), buf_(spec.d) {}

    ImplicitOutcome run(std::span<double> y) {
        if (!spec_.y_dependent) {
            std::copy(target_.begin(), target_.end(), y.begin());
            map(y, buf_);
            std::copy(buf_.begin(), buf_.end(), y.begin());
            return {};
        }
        if (cfg_.method == ImplicitMethod::Bisection) return bisect(y, 0);
        return fixed_point(y);
    }

private:
    /// out = E + dt f(t, y, z, u); returns false on non-finite output.
    bool map(std::span<const double> y, std::span<double> out) {
        spec_.eval(GeneratorArgs{t_, y, z_, u_, ctx_}, out);
        bool finite = true;
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] = target_[c] + dt_ * out[c];
            finite = finite && std::isfinite(out[c]);
        }
        return finite;
    }

    double scale(std::span<const double> y) const { return std::max(1.0, euclidean_norm(y)); }

    [[noreturn]] void fail(const std::string& why, double residual) const {
        throw StepError("implicit solve failed at path " + std::to_string(ctx_.path) + ", step " +
                            std::to_string(ctx_.step) + ": " + why + " (last residual " + format_double(residual) +
                            ")",
                        ctx_.path, ctx_.step, residual);
    }

    ImplicitOutcome fixed_point(std::span<double> y) {
        const std::size_t d = y.size();
        double theta = cfg_.damping;
        double prev = std::numeric_limits<double>::infinity();
        double res = prev;
        unsigned stalls = 0;
        std::vector<double> image(d);
        for (unsigned it = 1; it <= cfg_.max_iterations; ++it) {
            const bool finite = map(y, image);
            res = 0.0;
            for (std::size_t c = 0; c < d; ++c) res += (image[c] - y[c]) * (image[c] - y[c]);
            res = std::sqrt(res);
            if (!finite || !std::isfinite(res)) {
                if (d == 1) return bisect(y, it);
                fail("generator produced a non-finite value", res);
            }
            if (res <= cfg_.tolerance * scale(y)) {
                std::copy(image.begin(), image.end(), y.begin());
                return {it, false};
            }
            if (res >= prev) {
                ++stalls;
                if (d == 1 && stalls >= 2) return bisect(y, it);
                if (d > 1) {
                    theta *= 0.5;
                    if (theta < 1e-8) fail("damping underflow without contraction", res);
                }
            }
            prev = res;
            for (std::size_t c = 0; c < d; ++c) y[c] += theta * (image[c] - y[c]);
        }
        if (d == 1) return bisect(y, cfg_.max_iterations);
        fail("no convergence within max_iterations", res);
    }

    /// Scalar residual g(y) = y - E - dt f(y); NaN when f is not finite.
    double residual(double y) {
        std::span<const double> arg(&y, 1);
        if (!map(arg, buf_)) return std::numeric_limits<double>::quiet_NaN();
        return y - buf_[0];
    }

    /// Bracket the root around the current guess, then bisect.
    ImplicitOutcome bisect(std::span<double> y, unsigned used) {
        if (y.size() != 1) throw ValidationError("bisection requires d = 1");
        unsigned evals = used;
        double start = std::isfinite(y[0]) ? y[0] : target_[0];
        double g0 = residual(start);
        ++evals;
        if (!std::isfinite(g0)) {
            start = target_[0];
            g0 = residual(start);
            ++evals;
            if (!std::isfinite(g0)) fail("generator is not finite at the starting point", g0);
        }
        if (g0 == 0.0) {
            y[0] = start;
            return {evals, true};
        }
        double lo = start, hi = start, glo = g0, ghi = g0;
        double width = std::max(std::abs(g0), cfg_.tolerance * std::max(1.0, std::abs(start)));
        const double direction = g0 > 0.0 ? -1.0 : 1.0;
        bool bracketed = false;
        for (int expand = 0; expand < 2100; ++expand) {
            const double trial = start + direction * width;
            if (!std::isfinite(trial)) break;
            const double g = residual(trial);
            ++evals;
            if (std::isfinite(g)) {
                if ((g0 > 0.0) == (g > 0.0)) {
                    // same sign: move the near end of the bracket
                    if (direction < 0.0) {
                        hi = trial;
                        ghi = g;
                    } else {
                        lo = trial;
                        glo = g;
                    }
                } else {
                    if (direction < 0.0) {
                        lo = trial;
                        glo = g;
                    } else {
                        hi = trial;
                        ghi = g;
                    }
                    bracketed = true;
                    break;
                }
            }
            width *= 2.0;
        }
        if (!bracketed) fail("could not bracket the implicit root", g0);
        // invariant: g(lo) and g(hi) have opposite signs
        const bool increasing = glo < ghi;
        (void)glo;
        (void)ghi;
        const double target_width = 0.01 * cfg_.tolerance;
        for (int it = 0; it < 2200; ++it) {
            const double mid = lo + 0.5 * (hi - lo);
            if (!(mid > lo && mid < hi) || hi - lo <= target_width * std::max(1.0, std::abs(mid))) break;
            const double g = residual(mid);
            ++evals;
            if (g == 0.0) {
                lo = hi = mid;
                break;
            }
            if (!std::isfinite(g)) fail("generator is not finite inside the bracket", g);
            if ((g > 0.0) == increasing) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        y[0] = lo + 0.5 * (hi - lo);
        return {evals, true};
    }

    const GeneratorSpec& spec_;
    const SchemeConfig& cfg_;
    double t_;
    double dt_;
    std::span<const double> target_;
    std::span<const double> z_;
    std::span<const double> u_;
    PathContext ctx_;
    std::vector<double> buf_;
};

inline void check_dimensions(const GeneratorSpec& spec, const PathEnsemble& ens) {
    spec.validate();
    spec.check_model(ens.model());
}

}  // namespace detail

/// One backward step from Y_{i+1} to (Y_i, Z_i, U_i):
///   E_i      = regression fit of Y_{i+1}
///   Z_i      = fit((Y_{i+1} - E_i) dW_i) / dt_i
///   U_{i,j}  = fit((Y_{i+1} - E_i) (N_{i,j} - lambda_j dt_i)) / (lambda_j dt_i)
/// Centering by E_i leaves the conditional expectations unchanged and makes
/// Z and U invariant under constant shifts of Y_{i+1}.
///   Y_i      = solution of y = E_i + dt_i f(t_i, y, Z_i, U_i)
inline StepResult backward_step(std::span<const double> y_next, const PathEnsemble& ens, std::size_t step,
                                const GeneratorSpec& spec, const SchemeConfig& cfg,
                                const InitialGuessFn& initial_guess = {}) {
    cfg.validate();
    detail::check_dimensions(spec, ens);
    const std::size_t M = ens.paths();
    const std::size_t d = spec.d;
    const std::size_t k = spec.k;
    const std::size_t A = spec.atom_count();
    if (step >= ens.steps()) throw ValidationError("backward_step: step index out of range");
    if (y_next.size() != M * d) throw ValidationError("backward_step: Y_next must be paths x d");
    if (cfg.method == ImplicitMethod::Bisection && d != 1 && spec.y_dependent) {
        throw ValidationError("scheme: bisection requires d = 1");
    }
    for (double v : y_next) {
        if (!std::isfinite(v)) throw EvaluationError("backward_step: Y_next is not finite");
    }

    const double dt = ens.grid().dt(step);
    const double t = ens.grid().node(step);
    const std::size_t state_dim = ens.state_dim();
    std::vector<double> states(M * state_dim);
    for (std::size_t m = 0; m < M; ++m) {
        const auto x = ens.state(m, step);
        std::copy(x.begin(), x.end(), states.begin() + static_cast<std::ptrdiff_t>(m * state_dim));
    }
    const Regression reg(states, state_dim, BasisConfig{cfg.basis_degree, cfg.ridge});

    StepResult out;
    out.Y.assign(M * d, 0.0);
    out.Z.assign(M * d * k, 0.0);
    out.U.assign(M * A * d, 0.0);
    std::vector<double> expect(M * d);
    std::vector<double> values(M);

    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t m = 0; m < M; ++m) values[m] = y_next[m * d + c];
        const auto fit = reg.fit(values);
        for (std::size_t m = 0; m < M; ++m) expect[m * d + c] = fit.fitted[m];
        if (c == 0) {
            out.diagnostics.residual_std = fit.residual_std;
            out.diagnostics.fit_se =
                fit.residual_std * std::sqrt(static_cast<double>(reg.basis_size()) / static_cast<double>(M));
        }
        for (std::size_t l = 0; l < k; ++l) {
            for (std::size_t m = 0; m < M; ++m) values[m] = (y_next[m * d + c] - expect[m * d + c]) * ens.dW(m, step)[l];
            const auto zf = reg.fit(values);
            for (std::size_t m = 0; m < M; ++m) out.Z[(m * d + c) * k + l] = zf.fitted[m] / dt;
        }
        for (std::size_t j = 0; j < A; ++j) {
            const double mass = spec.intensities[j] * dt;
            if (mass < 1e-14) continue;
            for (std::size_t m = 0; m < M; ++m) values[m] = (y_next[m * d + c] - expect[m * d + c]) * ens.compensated_count(m, step, j);
            const auto uf = reg.fit(values);
            for (std::size_t m = 0; m < M; ++m) out.U[(m * A + j) * d + c] = uf.fitted[m] / mass;
        }
    }

    std::vector<detail::ImplicitOutcome> outcomes(M);
    parallel_for(M, [&](std::size_t m) {
        std::span<double> y(out.Y.data() + m * d, d);
        std::span<const double> target(expect.data() + m * d, d);
        std::copy(target.begin(), target.end(), y.begin());
        if (initial_guess) initial_guess(m, step, y);
        detail::ImplicitSolve solve(spec, cfg, t, dt, target, std::span<const double>(out.Z.data() + m * d * k, d * k),
                                    std::span<const double>(out.U.data() + m * A * d, A * d), PathContext{m, step});
        outcomes[m] = solve.run(y);
        for (double v : y) {
            if (!std::isfinite(v)) {
                throw StepError("implicit solve produced a non-finite Y at path " + std::to_string(m) + ", step " +
                                    std::to_string(step),
                                m, step, v);
            }
        }
    });

    auto& diag = out.diagnostics;
    diag.step = step;
    diag.basis_size = reg.basis_size();
    diag.condition = reg.condition();
    for (const auto& o : outcomes) {
        diag.max_iterations = std::max(diag.max_iterations, o.iterations);
        diag.total_iterations += o.iterations;
        diag.bisection_fallbacks += o.bisection ? 1 : 0;
    }
    return out;
}

/// Backward recursion from given terminal values (paths x d).
inline BsdeSolution solve_bsde(const GeneratorSpec& spec, std::span<const double> terminal_values,
                               const PathEnsemble& ens, const SchemeConfig& cfg,
                               const InitialGuessFn& initial_guess = {}, std::string terminal_id = "values") {
    cfg.validate();
    detail::check_dimensions(spec, ens);
    const std::size_t M = ens.paths();
    const std::size_t N = ens.steps();
    const std::size_t d = spec.d;
    if (terminal_values.size() != M * d) throw ValidationError("solve_bsde: terminal values must be paths x d");

    BsdeSolution sol = BsdeSolution::zeros(M, ens.grid(), d, spec.k, spec.intensities);
    sol.ensemble_fingerprint = ens.fingerprint();
    sol.generator_id = spec.id;
    sol.terminal_id = std::move(terminal_id);
    for (std::size_t m = 0; m < M; ++m) {
        std::copy_n(terminal_values.begin() + static_cast<std::ptrdiff_t>(m * d), d, sol.y(m, N).begin());
    }

    std::vector<double> y_next(terminal_values.begin(), terminal_values.end());
    for (std::size_t i = N; i-- > 0;) {
        StepResult step;
        try {
            step = backward_step(y_next, ens, i, spec, cfg, initial_guess);
        } catch (const RegressionError& e) {
            throw RegressionError("step " + std::to_string(i) + ": " + e.what(), e.condition());
        } catch (const EvaluationError& e) {
            throw EvaluationError("step " + std::to_string(i) + ": " + e.what());
        }
        for (std::size_t m = 0; m < M; ++m) {
            std::copy_n(step.Y.begin() + static_cast<std::ptrdiff_t>(m * d), d, sol.y(m, i).begin());
            std::copy_n(step.Z.begin() + static_cast<std::ptrdiff_t>(m * sol.z_size()), sol.z_size(),
                        sol.z(m, i).begin());
            std::copy_n(step.U.begin() + static_cast<std::ptrdiff_t>(m * sol.u_size()), sol.u_size(),
                        sol.u(m, i).begin());
        }
        sol.diagnostics[i] = step.diagnostics;
        y_next = std::move(step.Y);
    }
    return sol;
}

inline BsdeSolution solve_bsde(const GeneratorSpec& spec, const TerminalCondition& xi, const PathEnsemble& ens,
                               const SchemeConfig& cfg, const InitialGuessFn& initial_guess = {}) {
    if (xi.d != spec.d) throw ValidationError("solve_bsde: terminal dimension does not match the generator");
    const auto values = xi.evaluate(ens);
    return solve_bsde(spec, values, ens, cfg, initial_guess, xi.id);
}

inline BsdeSolution solve_bsde(const GeneratorSpec& spec, const TerminalCondition& xi, const PathEnsemble& ens,
                               const TimeGrid& grid, const SchemeConfig& cfg) {
    if (!(grid == ens.grid())) throw ValidationError("solve_bsde: ensemble was generated on a different grid");
    return solve_bsde(spec, xi, ens, cfg);
}

}  // namespace levy_bsde
