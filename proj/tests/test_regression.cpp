#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "levy_bsde/path_ensemble.hpp"
#include "levy_bsde/regression.hpp"
#include "support.hpp"

using namespace levy_bsde;
using levy_bsde::testing::Gen;

TEST(Regression, ConstantValuesAreReproduced) {
    Gen gen(1);
    for (unsigned degree : {0u, 1u, 2u, 3u}) {
        const auto states = gen.vector(500 * 2, -3, 3);
        const std::vector<double> values(500, 4.25);
        const auto fit = regress(values, states, 2, {degree, 1e-10});
        for (double v : fit.fitted) ASSERT_NEAR(v, 4.25, 1e-12);
    }
}

TEST(Regression, DegreeZeroIsSampleMean) {
    Gen gen(2);
    const auto states = gen.vector(300, -1, 1);
    const auto values = gen.vector(300, -5, 5);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= 300.0;
    const auto fit = regress(values, states, 1, {0, 1e-10});
    ASSERT_EQ(fit.coefficients.size(), 1u);
    for (double v : fit.fitted) EXPECT_NEAR(v, mean, 1e-13);
}

TEST(Regression, StateInSpanIsReproduced) {
    Gen gen(3);
    const std::size_t M = 1000;
    const auto states = gen.vector(M * 2, -2, 2);
    std::vector<double> first(M), quad(M);
    for (std::size_t m = 0; m < M; ++m) {
        first[m] = states[2 * m];
        quad[m] = 1.0 + states[2 * m] * states[2 * m + 1] - 0.5 * states[2 * m + 1] * states[2 * m + 1];
    }
    // The ridge is scaled to be negligible at this size; exact recovery needs ridge 0.
    const auto fit1 = regress(first, states, 2, {1, 0.0});
    const auto fit2 = regress(quad, states, 2, {2, 0.0});
    for (std::size_t m = 0; m < M; ++m) {
        ASSERT_NEAR(fit1.fitted[m], first[m], 1e-12);
        ASSERT_NEAR(fit2.fitted[m], quad[m], 1e-11);
    }
    const auto ridged = regress(first, states, 2, {1, 1e-10});
    for (std::size_t m = 0; m < M; ++m) ASSERT_NEAR(ridged.fitted[m], first[m], 1e-8);
}

TEST(Regression, MartingaleOracle) {
    // E[W_T | W_t] = W_t in a Brownian model.
    const auto grid = TimeGrid::uniform(1.0, 10);
    const std::size_t M = 20000;
    const auto ens = simulate_forward(LevyModel::brownian(), grid, M, 4);
    const std::size_t i = 4;
    std::vector<double> states(M), values(M);
    for (std::size_t m = 0; m < M; ++m) {
        states[m] = ens.state(m, i)[0];
        values[m] = ens.state(m, 10)[0];
    }
    const auto fit = regress(values, states, 1, {1, 1e-10});
    // Intercept ~ 0 and slope ~ 1 (coefficients are on the standardized state).
    double sx = 0, sxx = 0;
    for (double x : states) {
        sx += x;
        sxx += x * x;
    }
    const double mean = sx / M;
    const double sd = std::sqrt(sxx / M - mean * mean);
    const double slope = fit.coefficients[1] / sd;
    const double intercept = fit.coefficients[0] - fit.coefficients[1] * mean / sd;
    const double resid_sd = std::sqrt(grid.horizon() - grid.node(i));
    EXPECT_NEAR(intercept, 0.0, 3.0 * resid_sd / std::sqrt(M));
    EXPECT_NEAR(slope, 1.0, 3.0 * resid_sd / (sd * std::sqrt(M)));
    EXPECT_NEAR(fit.residual_std, resid_sd, 0.02);
}

TEST(Regression, ZeroVarianceComponentsAreDropped) {
    Gen gen(4);
    const std::size_t M = 200;
    std::vector<double> states(M * 2);
    for (std::size_t m = 0; m < M; ++m) {
        states[2 * m] = 7.0;
        states[2 * m + 1] = gen.uniform(-1, 1);
    }
    const Regression reg(states, 2, {2, 1e-10});
    EXPECT_EQ(reg.basis_size(), 3u);  // 1, x, x^2 in the varying component
    EXPECT_GE(reg.condition(), 1.0);
}

TEST(Regression, RankDeficientDesignRaises) {
    // Two distinct state values cannot support a quadratic without ridge.
    std::vector<double> states(100);
    for (std::size_t m = 0; m < states.size(); ++m) states[m] = m % 2 ? 1.0 : -1.0;
    try {
        Regression reg(states, 1, {2, 0.0});
        FAIL() << "expected RegressionError";
    } catch (const RegressionError& e) {
        EXPECT_GT(e.condition(), 1e10);
    }
    // Ridge repairs it.
    EXPECT_NO_THROW(Regression(states, 1, {2, 1e-10}));
}

TEST(Regression, FitIsLinearInValues) {
    Gen gen(5);
    const std::size_t M = 400;
    const auto states = gen.vector(M, -2, 2);
    const auto a = gen.vector(M, -1, 1);
    const auto b = gen.vector(M, -1, 1);
    std::vector<double> sum(M);
    for (std::size_t m = 0; m < M; ++m) sum[m] = 2.0 * a[m] - 3.0 * b[m];
    const Regression reg(states, 1, {2, 1e-10});
    const auto fa = reg.fit(a), fb = reg.fit(b), fs = reg.fit(sum);
    for (std::size_t m = 0; m < M; ++m) ASSERT_NEAR(fs.fitted[m], 2.0 * fa.fitted[m] - 3.0 * fb.fitted[m], 1e-13);
    const auto zero = reg.fit(std::vector<double>(M, 0.0));
    for (double v : zero.fitted) ASSERT_EQ(v, 0.0);
}
