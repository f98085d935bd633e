#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levy_bsde/error.hpp"

namespace levy_bsde {

inline double euclidean_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// One point mass of the Levy measure: jumps of size `mark` at rate `intensity`.
struct JumpAtom {
    std::vector<double> mark;
    double intensity = 0.0;
};

/// Drift + Brownian + finite atomic jump measure.
struct LevyModel {
    std::size_t d = 1;
    std::size_t k = 0;
    std::vector<double> drift;  // length d
    std::vector<double> sigma;  // d x k, row-major
    std::vector<JumpAtom> atoms;

    std::size_t atom_count() const noexcept { return atoms.size(); }

    double total_intensity() const noexcept {
        double total = 0.0;
        for (const auto& a : atoms) total += a.intensity;
        return total;
    }

    std::vector<double> intensities() const {
        std::vector<double> out;
        out.reserve(atoms.size());
        for (const auto& a : atoms) out.push_back(a.intensity);
        return out;
    }

    double sigma_at(std::size_t row, std::size_t col) const { return sigma[row * k + col]; }

    /// Drift once every atom is compensated: a + sum over |x_j| > 1 of lambda_j x_j.
    std::vector<double> compensated_drift() const {
        std::vector<double> out = drift;
        for (const auto& a : atoms) {
            if (euclidean_norm(a.mark) > 1.0) {
                for (std::size_t c = 0; c < d; ++c) out[c] += a.intensity * a.mark[c];
            }
        }
        return out;
    }

    void validate() const {
        if (d == 0) throw ValidationError("model: d must be positive");
        if (drift.size() != d) throw ValidationError("model: drift must have length d");
        if (sigma.size() != d * k) throw ValidationError("model: sigma must be d x k");
        for (double v : drift) {
            if (!std::isfinite(v)) throw ValidationError("model: drift must be finite");
        }
        for (double v : sigma) {
            if (!std::isfinite(v)) throw ValidationError("model: sigma must be finite");
        }
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            const auto& a = atoms[j];
            const std::string where = "model: atom " + std::to_string(j);
            if (a.mark.size() != d) throw ValidationError(where + " mark must have length d");
            if (!(a.intensity > 0.0) || !std::isfinite(a.intensity)) {
                throw ValidationError(where + " intensity must be positive and finite");
            }
            const double norm = euclidean_norm(a.mark);
            if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError(where + " mark must be nonzero");
        }
    }

    /// Scalar Brownian-only model: dX = a dt + s dW.
    static LevyModel brownian(double a = 0.0, double s = 1.0) {
        return LevyModel{1, 1, {a}, {s}, {}};
    }

    /// Deterministic model with no noise at all (k = 0, no atoms).
    static LevyModel noiseless(std::size_t d = 1, double a = 0.0) {
        return LevyModel{d, 0, std::vector<double>(d, a), {}, {}};
    }
};

/// Keeps exactly the atoms with |x_j| >= 1/n.
inline LevyModel truncate_levy(const LevyModel& model, unsigned n) {
    if (n == 0) throw ValidationError("truncate_levy: n must be >= 1");
    const double threshold = 1.0 / static_cast<double>(n);
    LevyModel out = model;
    out.atoms.clear();
    for (const auto& a : model.atoms) {
        if (euclidean_norm(a.mark) >= threshold) out.atoms.push_back(a);
    }
    return out;
}

/// Strictly increasing time nodes 0 = t_0 < ... < t_N = T.
class TimeGrid {
public:
    TimeGrid() = default;

    static TimeGrid uniform(double horizon, std::size_t steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("grid: T must be positive");
        if (steps == 0) throw ValidationError("grid: N must be positive");
        std::vector<double> nodes(steps + 1);
        for (std::size_t i = 0; i <= steps; ++i) {
            nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
        }
        nodes.back() = horizon;
        return TimeGrid(std::move(nodes));
    }

    static TimeGrid from_nodes(std::vector<double> nodes) {
        if (nodes.size() < 2) throw ValidationError("grid: need at least two nodes");
        if (nodes.front() != 0.0) throw ValidationError("grid: first node must be 0");
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (!(nodes[i] > nodes[i - 1])) throw ValidationError("grid: nodes must be strictly increasing");
        }
        return TimeGrid(std::move(nodes));
    }

    std::size_t steps() const noexcept { return nodes_.size() - 1; }
    double horizon() const noexcept { return nodes_.back(); }
    double node(std::size_t i) const { return nodes_[i]; }
    double dt(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
    std::span<const double> nodes() const noexcept { return nodes_; }

    bool operator==(const TimeGrid&) const = default;

private:
    explicit TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {}
    std::vector<double> nodes_{0.0, 1.0};
};

}  // namespace levy_bsde
