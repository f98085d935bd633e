#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "levy_bsde/parallel.hpp"
#include "levy_bsde/registry.hpp"
#include "levy_bsde/regression.hpp"
#include "levy_bsde/solver.hpp"
#include "support.hpp"

using namespace levy_bsde;

namespace {

/// Independent bisection for y + dt*y*log(y) = target on (0, target].
double ylogy_step_oracle(double target, double dt) {
    double lo = 1e-300, hi = target;
    for (int i = 0; i < 2000 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid + dt * mid * std::log(mid) - target > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Classical RK4 on dY/dt = Y log Y from t = T back to 0 with many substeps.
double ylogy_rk4_oracle(double xi, double T) {
    auto rhs = [](double y) { return y * std::log(y); };
    const int n = 100000;
    const double h = -T / n;
    double y = xi;
    for (int i = 0; i < n; ++i) {
        const double k1 = rhs(y), k2 = rhs(y + h * k1 / 2), k3 = rhs(y + h * k2 / 2), k4 = rhs(y + h * k3);
        y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
    }
    return y;
}

GeneratorSpec ylogy_positive(const LevyModel& model) { return make_generator("ylogy_osgood", model); }

double solve_noiseless_y0(const std::string& id, double xi, std::size_t N, SchemeConfig cfg = {}) {
    const auto model = LevyModel::noiseless();
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, N), 4, 1);
    const auto spec = make_generator(id, model);
    const auto sol = solve_bsde(spec, make_terminal("constant", model, {{"value", xi}}), ens, cfg);
    return sol.y(0, 0)[0];
}

}  // namespace

TEST(SchemeConfig, DefaultsAndValidation) {
    SchemeConfig c;
    EXPECT_EQ(c.basis_degree, 2u);
    EXPECT_EQ(c.method, ImplicitMethod::FixedPoint);
    EXPECT_EQ(c.damping, 1.0);
    EXPECT_EQ(c.tolerance, 1e-12);
    EXPECT_EQ(c.max_iterations, 200u);
    EXPECT_EQ(c.ridge, 1e-10);
    c.damping = 0.0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.tolerance = 0.0;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(BackwardStep, ZeroGeneratorIsPureRegression) {
    const auto model = LevyModel{1, 1, {0.0}, {1.0}, {JumpAtom{{0.7}, 2.0}}};
    const auto grid = TimeGrid::uniform(1.0, 5);
    const std::size_t M = 2000;
    const auto ens = simulate_forward(model, grid, M, 3);
    const auto spec = make_generator("zero", model);
    std::vector<double> y_next(M), states(M), zv(M), uv(M);
    const std::size_t i = 2;
    const double dt = grid.dt(i);
    for (std::size_t m = 0; m < M; ++m) {
        y_next[m] = std::sin(ens.state(m, i + 1)[0]);
        states[m] = ens.state(m, i)[0];
    }
    const SchemeConfig cfg;
    const auto step = backward_step(y_next, ens, i, spec, cfg);
    const auto e = regress(y_next, states, 1, {cfg.basis_degree, cfg.ridge});
    for (std::size_t m = 0; m < M; ++m) {
        zv[m] = (y_next[m] - e.fitted[m]) * ens.dW(m, i)[0];
        uv[m] = (y_next[m] - e.fitted[m]) * ens.compensated_count(m, i, 0);
    }
    const auto z = regress(zv, states, 1, {cfg.basis_degree, cfg.ridge});
    const auto u = regress(uv, states, 1, {cfg.basis_degree, cfg.ridge});
    for (std::size_t m = 0; m < M; ++m) {
        ASSERT_EQ(step.Y[m], e.fitted[m]);
        ASSERT_EQ(step.Z[m], z.fitted[m] / dt);
        ASSERT_EQ(step.U[m], u.fitted[m] / (2.0 * dt));
    }
    EXPECT_EQ(step.diagnostics.total_iterations, 0u);
}

TEST(BackwardStep, ScalarImplicitEuler) {
    const auto model = LevyModel::noiseless();
    const auto grid = TimeGrid::uniform(1.0, 10);
    const auto ens = simulate_forward(model, grid, 3, 1);
    const auto spec = make_generator("linear_drift", model);
    const std::vector<double> ones(3, 1.0);
    const auto step = backward_step(ones, ens, 4, spec, SchemeConfig{});
    for (double y : step.Y) EXPECT_NEAR(y, 1.0 / (1.0 + 0.1), 1e-13);
}

TEST(BackwardStep, YLogYRootMatchesBisectionOracle) {
    const auto model = LevyModel::noiseless();
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 100), 2, 1);
    const auto spec = ylogy_positive(model);
    const double e = std::numbers::e;
    const std::vector<double> y_next(2, e);
    const double oracle = ylogy_step_oracle(e, 0.01);
    EXPECT_NEAR(oracle, 2.6915, 2e-4);
    for (auto method : {ImplicitMethod::FixedPoint, ImplicitMethod::Bisection}) {
        SchemeConfig cfg;
        cfg.method = method;
        const auto step = backward_step(y_next, ens, 0, spec, cfg);
        EXPECT_NEAR(step.Y[0], oracle, 1e-11);
    }
}

TEST(BackwardStep, NoRootRaisesStepError) {
    const auto model = LevyModel::noiseless();
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 10), 2, 1);
    const auto spec = make_generator("quadratic", model);
    const std::vector<double> y_next(2, 100.0);  // y = 100 + 0.1 y^2 has no real root
    try {
        backward_step(y_next, ens, 7, spec, SchemeConfig{});
        FAIL() << "expected StepError";
    } catch (const StepError& e) {
        EXPECT_EQ(e.step(), 7u);
        EXPECT_EQ(e.path(), 0u);
        EXPECT_NE(std::string(e.what()).find("step 7"), std::string::npos);
    }
}

TEST(BackwardStep, BisectionNeedsScalarState) {
    const auto model = LevyModel::noiseless(2);
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 4), 2, 1);
    SchemeConfig cfg;
    cfg.method = ImplicitMethod::Bisection;
    const std::vector<double> y_next(4, 1.0);
    EXPECT_THROW(backward_step(y_next, ens, 0, make_generator("linear_drift", model), cfg), ValidationError);
}

TEST(BackwardStep, VectorFixedPointWithDamping) {
    const auto model = LevyModel::noiseless(2);
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 4), 2, 1);
    SchemeConfig cfg;
    cfg.damping = 0.5;
    const auto spec = make_generator("linear_drift", model, {{"a", 3.0}});
    const std::vector<double> y_next{1.0, -2.0, 1.0, -2.0};
    const auto step = backward_step(y_next, ens, 0, spec, cfg);
    EXPECT_NEAR(step.Y[0], 1.0 / 1.75, 1e-12);
    EXPECT_NEAR(step.Y[1], -2.0 / 1.75, 1e-12);
    EXPECT_GT(step.diagnostics.max_iterations, 1u);
}

TEST(BackwardStep, NegligibleIntensityGivesZeroU) {
    const auto model = LevyModel{1, 1, {0.0}, {1.0}, {JumpAtom{{1.0}, 1e-16}}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 4), 500, 1);
    std::vector<double> y_next(500);
    for (std::size_t m = 0; m < 500; ++m) y_next[m] = ens.state(m, 3)[0];
    const auto step = backward_step(y_next, ens, 2, make_generator("zero", model), SchemeConfig{});
    for (double u : step.U) EXPECT_EQ(u, 0.0);
}

TEST(SolveBsde, MartingaleRepresentation) {
    const auto model = LevyModel::brownian();
    const auto grid = TimeGrid::uniform(1.0, 20);
    const std::size_t M = 5000;
    const auto ens = simulate_forward(model, grid, M, 11);
    SchemeConfig cfg;
    cfg.basis_degree = 1;
    const auto xi = make_terminal("brownian", model);
    const auto sol = solve_bsde(make_generator("zero", model), xi, ens, cfg);
    double worst = 0.0, zsum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t i = 0; i <= grid.steps(); ++i) {
            worst = std::max(worst, std::abs(sol.y(m, i)[0] - ens.brownian(m, i)[0]));
        }
        for (std::size_t i = 0; i < grid.steps(); ++i) zsum += sol.z(m, i)[0];
    }
    EXPECT_LT(worst, 0.1);
    EXPECT_NEAR(zsum / (M * grid.steps()), 1.0, 0.05);
    EXPECT_EQ(sol.U.size(), 0u);
}

TEST(SolveBsde, JumpMartingaleRecoversJumpIntegrand) {
    const auto model = LevyModel{1, 0, {0.0}, {}, {JumpAtom{{1.0}, 2.0}}};
    const auto grid = TimeGrid::uniform(1.0, 10);
    const std::size_t M = 20000;
    const auto ens = simulate_forward(model, grid, M, 5);
    SchemeConfig cfg;
    cfg.basis_degree = 1;
    const auto sol = solve_bsde(make_generator("zero", model), make_terminal("state", model), ens, cfg);
    double usum = 0.0;
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t i = 0; i < grid.steps(); ++i) usum += sol.u(m, i)[0];
    EXPECT_NEAR(usum / (M * grid.steps()), 1.0, 0.05);
}

TEST(SolveBsde, TerminalLayerIsXiExactly) {
    const auto model = LevyModel{1, 1, {0.0}, {1.0}, {JumpAtom{{0.5}, 1.0}}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 8), 300, 2);
    const auto xi = make_terminal("abs_brownian", model, {{"scale", 1.5}, {"shift", -0.1}});
    const auto sol = solve_bsde(ylogy_positive(model), xi, ens, SchemeConfig{});
    const auto values = xi.evaluate(ens);
    for (std::size_t m = 0; m < 300; ++m) EXPECT_EQ(sol.y(m, 8)[0], values[m]);
    for (double v : sol.Y) ASSERT_TRUE(std::isfinite(v));
    for (double v : sol.Z) ASSERT_TRUE(std::isfinite(v));
    for (double v : sol.U) ASSERT_TRUE(std::isfinite(v));
}

TEST(SolveBsde, LinearOdeOracle) {
    EXPECT_NEAR(solve_noiseless_y0("linear_drift", 1.0, 1000), std::exp(-1.0), 1e-3);
}

TEST(SolveBsde, YLogYOdeOracle) {
    const double exact = std::exp(std::exp(-1.0));
    EXPECT_NEAR(ylogy_rk4_oracle(std::numbers::e, 1.0), exact, 1e-12);
    EXPECT_NEAR(solve_noiseless_y0("ylogy_osgood", std::numbers::e, 1000), exact, 1e-3);
}

TEST(SolveBsde, GridRefinementReducesOdeError) {
    for (const char* id : {"linear_drift", "ylogy_osgood"}) {
        const double xi = std::string(id) == "linear_drift" ? 1.0 : std::numbers::e;
        const double exact = std::string(id) == "linear_drift" ? std::exp(-1.0) : std::exp(std::exp(-1.0));
        double prev = 1e300;
        for (std::size_t N : {50u, 100u, 200u, 400u}) {
            const double err = std::abs(solve_noiseless_y0(id, xi, N) - exact);
            EXPECT_LT(err, prev) << id << " N=" << N;
            if (prev < 1e300) {
                EXPECT_GT(prev / err, 1.8) << id << " N=" << N;
            }
            prev = err;
        }
    }
}

TEST(SolveBsde, ZeroDataGivesExactZero) {
    const auto model = LevyModel{1, 1, {0.1}, {0.8}, {JumpAtom{{0.5}, 1.0}, JumpAtom{{-1.5}, 0.3}}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 10), 400, 9);
    const auto xi = make_terminal("constant", model, {{"value", 0.0}});
    for (const char* id : {"zero", "linear_drift", "ylogy_osgood", "showcase_simplified", "quadratic"}) {
        const auto sol = solve_bsde(make_generator(id, model), xi, ens, SchemeConfig{});
        for (double v : sol.Y) ASSERT_EQ(v, 0.0) << id;
        for (double v : sol.Z) ASSERT_EQ(v, 0.0) << id;
        for (double v : sol.U) ASSERT_EQ(v, 0.0) << id;
        for (const auto& d : sol.diagnostics) {
            if (make_generator(id, model).y_dependent) {
                EXPECT_LE(d.max_iterations, 1u) << id;
            }
        }
    }
}

TEST(SolveBsde, ShiftEquivarianceForYIndependentGenerator) {
    const auto model = LevyModel{1, 1, {0.0}, {1.0}, {JumpAtom{{0.5}, 1.0}}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 10), 1000, 4);
    const auto spec = make_generator("jump_linear", model, {{"weight", 0.5}});
    const auto xi = make_terminal("abs_brownian", model);
    const double c = 2.5;
    const auto a = solve_bsde(spec, xi, ens, SchemeConfig{});
    const auto b = solve_bsde(spec, make_terminal("abs_brownian", model, {{"shift", c}}), ens, SchemeConfig{});
    for (std::size_t i = 0; i < a.Y.size(); ++i) ASSERT_NEAR(b.Y[i], a.Y[i] + c, 1e-11);
    for (std::size_t i = 0; i < a.Z.size(); ++i) ASSERT_NEAR(b.Z[i], a.Z[i], 1e-9);
    for (std::size_t i = 0; i < a.U.size(); ++i) ASSERT_NEAR(b.U[i], a.U[i], 1e-9);
}

TEST(SolveBsde, BitIdenticalAcrossRunsAndThreadCounts) {
    const auto model = LevyModel{1, 1, {0.0}, {1.0}, {JumpAtom{{0.5}, 1.0}}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 10), 3000, 4);
    const auto spec = make_generator("ylogy_osgood", model, {{"c_z", 0.5}});
    const auto xi = make_terminal("brownian", model);
    set_max_threads(1);
    const auto a = solve_bsde(spec, xi, ens, SchemeConfig{});
    set_max_threads(3);
    const auto b = solve_bsde(spec, xi, ens, SchemeConfig{});
    set_max_threads(0);
    EXPECT_TRUE(a.bitwise_equal(b));
}

TEST(SolveBsde, BisectionAgreesWithFixedPoint) {
    const auto model = LevyModel::brownian();
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 10), 1000, 6);
    const auto spec = ylogy_positive(model);
    const auto xi = make_terminal("brownian", model);
    SchemeConfig bis;
    bis.method = ImplicitMethod::Bisection;
    const auto a = solve_bsde(spec, xi, ens, SchemeConfig{});
    const auto b = solve_bsde(spec, xi, ens, bis);
    EXPECT_LT(levy_bsde::testing::max_abs_diff(a.Y, b.Y), 1e-10);
}

TEST(SolveBsde, RejectsMismatchedDimensionsAndGrid) {
    const auto ens = simulate_forward(LevyModel::brownian(), TimeGrid::uniform(1.0, 4), 10, 1);
    const auto other = make_generator("zero", LevyModel::noiseless());
    EXPECT_THROW(solve_bsde(other, make_terminal("constant", LevyModel::noiseless()), ens, SchemeConfig{}),
                 ValidationError);
    const auto spec = make_generator("zero", LevyModel::brownian());
    EXPECT_THROW(solve_bsde(spec, make_terminal("brownian", LevyModel::brownian()), ens, TimeGrid::uniform(1.0, 5),
                            SchemeConfig{}),
                 ValidationError);
}

TEST(SolveBsde, NonFiniteTerminalRaises) {
    const auto model = LevyModel::brownian();
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 4), 10, 1);
    TerminalCondition bad{"bad", 1, [](const PathEnsemble&, std::size_t, std::span<double> out) { out[0] = NAN; }};
    EXPECT_THROW(solve_bsde(make_generator("zero", model), bad, ens, SchemeConfig{}), EvaluationError);
}

TEST(SolveBsde, CsvDump) {
    const auto model = LevyModel{1, 1, {0.0}, {1.0}, {JumpAtom{{0.5}, 1.0}}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1.0, 3), 2, 1);
    SchemeConfig cfg;
    cfg.basis_degree = 0;
    const auto sol = solve_bsde(make_generator("zero", model), make_terminal("brownian", model), ens, cfg);
    std::ostringstream os;
    sol.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "path,step,field,index,value");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 2u * (4u + 3u + 3u));
}
