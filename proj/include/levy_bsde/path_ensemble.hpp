#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "levy_bsde/error.hpp"
#include "levy_bsde/format.hpp"
#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/parallel.hpp"
#include "levy_bsde/random.hpp"

namespace levy_bsde {

class PathEnsemble;
PathEnsemble simulate_forward(const LevyModel& model, const TimeGrid& grid, std::size_t paths,
                              std::uint64_t seed);

/// Seeded Monte Carlo forward paths. Immutable once built; all storage is
/// path-major so each path owns a contiguous block.
class PathEnsemble {
public:
    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return grid_.steps(); }
    std::size_t state_dim() const noexcept { return model_.d; }
    std::size_t brownian_dim() const noexcept { return model_.k; }
    std::size_t atom_count() const noexcept { return model_.atom_count(); }
    std::uint64_t seed() const noexcept { return seed_; }
    const LevyModel& model() const noexcept { return model_; }
    const TimeGrid& grid() const noexcept { return grid_; }

    /// Brownian increment over [t_i, t_{i+1}], length k.
    std::span<const double> dW(std::size_t path, std::size_t step) const {
        const std::size_t k = model_.k;
        return {dW_.data() + (path * steps() + step) * k, k};
    }

    /// Poisson counts per atom over [t_i, t_{i+1}].
    std::span<const std::uint32_t> counts(std::size_t path, std::size_t step) const {
        const std::size_t a = atom_count();
        return {counts_.data() + (path * steps() + step) * a, a};
    }

    /// Forward state X at node i (0 <= i <= N), length d.
    std::span<const double> state(std::size_t path, std::size_t node) const {
        const std::size_t d = model_.d;
        return {X_.data() + (path * (steps() + 1) + node) * d, d};
    }

    /// Brownian motion W at node i, length k.
    std::span<const double> brownian(std::size_t path, std::size_t node) const {
        const std::size_t k = model_.k;
        return {W_.data() + (path * (steps() + 1) + node) * k, k};
    }

    /// Compensated count N_j - lambda_j dt_i for one atom.
    double compensated_count(std::size_t path, std::size_t step, std::size_t atom) const {
        return static_cast<double>(counts(path, step)[atom]) -
               model_.atoms[atom].intensity * grid_.dt(step);
    }

    /// Total jumps of all atoms along one path.
    std::uint64_t total_jumps(std::size_t path) const {
        std::uint64_t total = 0;
        const std::size_t a = atom_count();
        const std::uint32_t* base = counts_.data() + path * steps() * a;
        for (std::size_t i = 0; i < steps() * a; ++i) total += base[i];
        return total;
    }

    /// Identifies (model, grid, M, seed); equal fingerprints mean the same ensemble.
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

    /// Raw byte view of the simulated arrays, for bit-identity checks.
    bool bitwise_equal(const PathEnsemble& other) const {
        auto same = [](const auto& a, const auto& b) {
            return a.size() == b.size() &&
                   (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(a[0])) == 0);
        };
        return paths_ == other.paths_ && seed_ == other.seed_ && grid_ == other.grid_ &&
               same(dW_, other.dW_) && same(counts_, other.counts_) && same(X_, other.X_) &&
               same(W_, other.W_);
    }

    /// CSV with header `path,step,component,X`.
    void write_csv(std::ostream& os) const {
        os << "path,step,component,X\n";
        std::string line;
        for (std::size_t m = 0; m < paths_; ++m) {
            for (std::size_t i = 0; i <= steps(); ++i) {
                const auto x = state(m, i);
                for (std::size_t c = 0; c < x.size(); ++c) {
                    line.clear();
                    append_uint(line, m);
                    line += ',';
                    append_uint(line, i);
                    line += ',';
                    append_uint(line, c);
                    line += ',';
                    append_double(line, x[c]);
                    line += '\n';
                    os << line;
                }
            }
        }
    }

private:
    friend PathEnsemble simulate_forward(const LevyModel&, const TimeGrid&, std::size_t, std::uint64_t);

    LevyModel model_;
    TimeGrid grid_;
    std::size_t paths_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t fingerprint_ = 0;
    std::vector<double> dW_;
    std::vector<std::uint32_t> counts_;
    std::vector<double> X_;
    std::vector<double> W_;
};

namespace detail {
inline std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t h) {
    for (double v : values) {
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h);
    }
    return h;
}
}  // namespace detail

/// Simulates X_{i+1} = X_i + a' dt + sigma dW + sum_j x_j (N_j - lambda_j dt) on every path.
/// Each (path, step, stream) draws from its own counter-keyed substream, so
/// results do not depend on thread count or path order.
inline PathEnsemble simulate_forward(const LevyModel& model, const TimeGrid& grid, std::size_t paths,
                                     std::uint64_t seed) {
    model.validate();
    if (paths == 0) throw ValidationError("simulate_forward: path count must be >= 1");

    PathEnsemble ens;
    ens.model_ = model;
    ens.grid_ = grid;
    ens.paths_ = paths;
    ens.seed_ = seed;

    const std::size_t n = grid.steps();
    const std::size_t d = model.d;
    const std::size_t k = model.k;
    const std::size_t a = model.atom_count();
    ens.dW_.assign(paths * n * k, 0.0);
    ens.counts_.assign(paths * n * a, 0);
    ens.X_.assign(paths * (n + 1) * d, 0.0);
    ens.W_.assign(paths * (n + 1) * k, 0.0);

    const std::vector<double> drift = model.compensated_drift();

    parallel_for(paths, [&](std::size_t m) {
        double* dw_path = ens.dW_.data() + m * n * k;
        std::uint32_t* cnt_path = ens.counts_.data() + m * n * a;
        double* x_path = ens.X_.data() + m * (n + 1) * d;
        double* w_path = ens.W_.data() + m * (n + 1) * k;
        for (std::size_t i = 0; i < n; ++i) {
            const double dt = grid.dt(i);
            const double sqrt_dt = std::sqrt(dt);
            double* dw = dw_path + i * k;
            if (k > 0) {
                StreamRng rng(seed, m, static_cast<std::uint32_t>(i), kBrownianTag);
                for (std::size_t l = 0; l < k; ++l) {
                    dw[l] = sqrt_dt * rng.normal();
                    w_path[(i + 1) * k + l] = w_path[i * k + l] + dw[l];
                }
            }
            std::uint32_t* cnt = cnt_path + i * a;
            for (std::size_t j = 0; j < a; ++j) {
                StreamRng rng(seed, m, static_cast<std::uint32_t>(i),
                              kAtomTagBase + static_cast<std::uint32_t>(j));
                cnt[j] = rng.poisson(model.atoms[j].intensity * dt);
            }
            const double* x = x_path + i * d;
            double* x_next = x_path + (i + 1) * d;
            for (std::size_t c = 0; c < d; ++c) {
                double inc = drift[c] * dt;
                for (std::size_t l = 0; l < k; ++l) inc += model.sigma_at(c, l) * dw[l];
                for (std::size_t j = 0; j < a; ++j) {
                    const auto& atom = model.atoms[j];
                    inc += atom.mark[c] * (static_cast<double>(cnt[j]) - atom.intensity * dt);
                }
                x_next[c] = x[c] + inc;
            }
        }
    });

    std::uint64_t h = fnv1a("levy_bsde.ensemble");
    h = detail::hash_doubles(grid.nodes(), h);
    h = detail::hash_doubles(model.drift, h);
    h = detail::hash_doubles(model.sigma, h);
    for (const auto& atom : model.atoms) {
        h = detail::hash_doubles(atom.mark, h);
        h = detail::hash_doubles(std::span<const double>(&atom.intensity, 1), h);
    }
    const double meta[] = {static_cast<double>(d), static_cast<double>(k), static_cast<double>(paths)};
    h = detail::hash_doubles(meta, h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&seed), sizeof seed), h);
    ens.fingerprint_ = h;
    return ens;
}

}  // namespace levy_bsde
