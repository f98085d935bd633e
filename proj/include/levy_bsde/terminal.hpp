#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/path_ensemble.hpp"

namespace levy_bsde {

using TerminalFn = std::function<void(const PathEnsemble&, std::size_t, std::span<double>)>;

/// xi as a function of one forward path (usually of its terminal state).
struct TerminalCondition {
    std::string id;
    std::size_t d = 1;
    TerminalFn fn;

    /// xi on every path, stored paths x d. Raises EvaluationError on non-finite output.
    std::vector<double> evaluate(const PathEnsemble& ens) const {
        if (!fn) throw ValidationError("terminal condition " + id + " has no function");
        std::vector<double> out(ens.paths() * d);
        for (std::size_t m = 0; m < ens.paths(); ++m) {
            std::span<double> row(out.data() + m * d, d);
            fn(ens, m, row);
            for (double v : row) {
                if (!std::isfinite(v)) {
                    throw EvaluationError("terminal condition " + id + " is not finite on path " + std::to_string(m));
                }
            }
        }
        return out;
    }
};

/// xi' = shift + scale * xi.
inline TerminalCondition affine(TerminalCondition xi, double scale, double shift = 0.0) {
    if (scale == 1.0 && shift == 0.0) return xi;
    xi.fn = [inner = std::move(xi.fn), scale, shift](const PathEnsemble& e, std::size_t m, std::span<double> out) {
        inner(e, m, out);
        for (double& v : out) v = shift + scale * v;
    };
    return xi;
}

}  // namespace levy_bsde
