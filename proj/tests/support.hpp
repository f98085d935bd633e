#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "levy_bsde/levy_model.hpp"

namespace levy_bsde::testing {

/// Small hand-rolled input generator for property tests; independent of the library RNG.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }

    /// Magnitude log-uniform in [10^lo_exp, 10^hi_exp] with a random sign.
    double wide(double lo_exp, double hi_exp) {
        const double mag = std::pow(10.0, uniform(lo_exp, hi_exp));
        return coin() ? mag : -mag;
    }

    bool coin() { return std::bernoulli_distribution(0.5)(eng_); }

    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }

    std::vector<double> vector(std::size_t n, double lo, double hi) {
        std::vector<double> v(n);
        for (double& x : v) x = uniform(lo, hi);
        return v;
    }

private:
    std::mt19937_64 eng_;
};

inline LevyModel brownian_1d() { return LevyModel::brownian(0.0, 1.0); }

inline LevyModel jump_model_1d(double mark, double intensity, double sigma = 0.0) {
    LevyModel m;
    m.d = 1;
    m.k = sigma != 0.0 ? 1 : 0;
    m.drift = {0.0};
    if (m.k) m.sigma = {sigma};
    m.atoms.push_back(JumpAtom{{mark}, intensity});
    return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace levy_bsde::testing
