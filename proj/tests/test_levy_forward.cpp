#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/parallel.hpp"
#include "levy_bsde/path_ensemble.hpp"
#include "support.hpp"

using namespace levy_bsde;
using levy_bsde::testing::jump_model_1d;

TEST(LevyModel, RejectsNonPositiveIntensityAndZeroMark) {
    auto m = jump_model_1d(1.0, 0.0);
    EXPECT_THROW(m.validate(), ValidationError);
    m = jump_model_1d(0.0, 1.0);
    EXPECT_THROW(m.validate(), ValidationError);
    EXPECT_THROW(simulate_forward(m, TimeGrid::uniform(1, 4), 10, 1), ValidationError);
}

TEST(LevyModel, RejectsShapeMismatch) {
    LevyModel m{2, 1, {0.0}, {1.0, 1.0}, {}};
    EXPECT_THROW(m.validate(), ValidationError);
}

TEST(LevyModel, CompensatedDriftAbsorbsLargeMarks) {
    LevyModel m{1, 0, {0.5}, {}, {JumpAtom{{2.0}, 3.0}, JumpAtom{{0.5}, 4.0}, JumpAtom{{-1.5}, 1.0}}};
    const auto a = m.compensated_drift();
    EXPECT_DOUBLE_EQ(a[0], 0.5 + 3.0 * 2.0 - 1.5);
}

TEST(TruncateLevy, KeepsMarksAtLeastOneOverN) {
    LevyModel m{1, 0, {0.0}, {}, {JumpAtom{{0.05}, 1.0}, JumpAtom{{0.5}, 1.0}, JumpAtom{{-2.0}, 1.0}}};
    const auto t = truncate_levy(m, 10);
    ASSERT_EQ(t.atom_count(), 2u);
    EXPECT_EQ(t.atoms[0].mark[0], 0.5);
    EXPECT_EQ(t.atoms[1].mark[0], -2.0);
}

TEST(TruncateLevy, IdentityWhenThresholdBelowAllMarks) {
    LevyModel m{1, 0, {0.0}, {}, {JumpAtom{{0.5}, 1.0}, JumpAtom{{2.0}, 2.0}}};
    const auto t = truncate_levy(m, 2);
    EXPECT_EQ(t.atom_count(), 2u);
}

TEST(TruncateLevy, RemovesEverythingAtNOne) {
    LevyModel m{1, 1, {0.0}, {1.0}, {JumpAtom{{0.5}, 1.0}, JumpAtom{{-0.9}, 2.0}}};
    const auto t = truncate_levy(m, 1);
    EXPECT_EQ(t.atom_count(), 0u);
    const auto ens = simulate_forward(t, TimeGrid::uniform(1, 10), 100, 3);
    EXPECT_EQ(ens.atom_count(), 0u);
}

TEST(TruncateLevy, Idempotent) {
    levy_bsde::testing::Gen gen(17);
    for (int trial = 0; trial < 200; ++trial) {
        LevyModel m{1, 0, {0.0}, {}, {}};
        const std::size_t atoms = 1 + gen.index(6);
        for (std::size_t j = 0; j < atoms; ++j) m.atoms.push_back(JumpAtom{{gen.wide(-3, 1)}, gen.uniform(0.1, 5)});
        const unsigned n = 1 + static_cast<unsigned>(gen.index(50));
        const auto once = truncate_levy(m, n);
        const auto twice = truncate_levy(once, n);
        ASSERT_EQ(once.atom_count(), twice.atom_count());
        for (std::size_t j = 0; j < once.atom_count(); ++j) EXPECT_EQ(once.atoms[j].mark, twice.atoms[j].mark);
    }
}

TEST(TimeGrid, UniformEndsAtHorizon) {
    const auto g = TimeGrid::uniform(0.7, 13);
    EXPECT_EQ(g.steps(), 13u);
    EXPECT_EQ(g.node(0), 0.0);
    EXPECT_EQ(g.horizon(), 0.7);
    for (std::size_t i = 0; i < g.steps(); ++i) EXPECT_GT(g.dt(i), 0.0);
}

TEST(TimeGrid, RejectsBadNodes) {
    EXPECT_THROW(TimeGrid::uniform(0.0, 4), ValidationError);
    EXPECT_THROW(TimeGrid::uniform(1.0, 0), ValidationError);
    EXPECT_THROW(TimeGrid::from_nodes({0.0, 0.5, 0.5, 1.0}), ValidationError);
    EXPECT_THROW(TimeGrid::from_nodes({0.1, 1.0}), ValidationError);
}

TEST(SimulateForward, NoNoiseNoDriftIsZero) {
    const auto ens = simulate_forward(LevyModel::noiseless(2, 0.0), TimeGrid::uniform(1, 7), 20, 5);
    for (std::size_t m = 0; m < ens.paths(); ++m)
        for (std::size_t i = 0; i <= ens.steps(); ++i)
            for (double x : ens.state(m, i)) EXPECT_EQ(x, 0.0);
}

TEST(SimulateForward, DeterministicDrift) {
    LevyModel model{1, 1, {1.0}, {0.0}, {}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1, 64), 10, 5);
    for (std::size_t m = 0; m < ens.paths(); ++m) EXPECT_NEAR(ens.state(m, 64)[0], 1.0, 1e-12);
}

TEST(SimulateForward, StartsAtZeroAndFollowsRecursion) {
    LevyModel model{2, 2, {0.1, -0.2}, {1.0, 0.5, 0.0, 2.0},
                    {JumpAtom{{1.5, 0.0}, 0.7}, JumpAtom{{-0.3, 0.4}, 2.0}}};
    const auto grid = TimeGrid::from_nodes({0.0, 0.1, 0.35, 0.5, 1.0});
    const auto ens = simulate_forward(model, grid, 50, 8);
    const auto a = model.compensated_drift();
    for (std::size_t m = 0; m < ens.paths(); ++m) {
        for (double x : ens.state(m, 0)) EXPECT_EQ(x, 0.0);
        for (std::size_t i = 0; i < grid.steps(); ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                double inc = a[c] * grid.dt(i);
                for (std::size_t l = 0; l < 2; ++l) inc += model.sigma_at(c, l) * ens.dW(m, i)[l];
                for (std::size_t j = 0; j < 2; ++j) inc += model.atoms[j].mark[c] * ens.compensated_count(m, i, j);
                EXPECT_NEAR(ens.state(m, i + 1)[c], ens.state(m, i)[c] + inc, 1e-12);
            }
        }
    }
}

TEST(SimulateForward, JumpCountMatchesPoissonMoments) {
    const auto model = jump_model_1d(1.0, 2.0);
    const std::size_t M = 100000;
    const auto ens = simulate_forward(model, TimeGrid::uniform(1, 10), M, 12345);
    double total = 0, x_mean = 0;
    for (std::size_t m = 0; m < M; ++m) {
        total += static_cast<double>(ens.total_jumps(m));
        x_mean += ens.state(m, 10)[0];
    }
    total /= M;
    x_mean /= M;
    EXPECT_NEAR(total, 2.0, 3.0 * std::sqrt(2.0 / M));
    // a' = a = 0 for |x| <= 1, so X_T is centred.
    EXPECT_NEAR(x_mean, 0.0, 3.0 * std::sqrt(2.0 / M));
}

TEST(SimulateForward, CompensatedJumpsAreCentredPerStep) {
    LevyModel model{1, 1, {0.0}, {0.3}, {JumpAtom{{0.8}, 1.5}, JumpAtom{{-2.0}, 0.5}}};
    const std::size_t M = 40000;
    const auto grid = TimeGrid::uniform(1, 8);
    const auto ens = simulate_forward(model, grid, M, 99);
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        double s = 0, s2 = 0, w2 = 0;
        for (std::size_t m = 0; m < M; ++m) {
            double v = 0;
            for (std::size_t j = 0; j < 2; ++j) v += model.atoms[j].mark[0] * ens.compensated_count(m, i, j);
            s += v;
            s2 += v * v;
            w2 += ens.dW(m, i)[0] * ens.dW(m, i)[0];
        }
        const double mean = s / M;
        const double se = std::sqrt((s2 / M - mean * mean) / M);
        EXPECT_LE(std::abs(mean), 4.0 * se) << "step " << i;
        const double dt = grid.dt(i);
        EXPECT_NEAR(w2 / M, dt, 4.0 * dt * std::sqrt(2.0 / M)) << "step " << i;
    }
}

TEST(SimulateForward, SeedDeterminismIndependentOfThreads) {
    LevyModel model{1, 1, {0.2}, {1.0}, {JumpAtom{{0.5}, 3.0}}};
    const auto grid = TimeGrid::uniform(1, 20);
    set_max_threads(1);
    const auto a = simulate_forward(model, grid, 3000, 77);
    set_max_threads(4);
    const auto b = simulate_forward(model, grid, 3000, 77);
    set_max_threads(0);
    EXPECT_TRUE(a.bitwise_equal(b));
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
    const auto c = simulate_forward(model, grid, 3000, 78);
    EXPECT_FALSE(a.bitwise_equal(c));
    EXPECT_NE(a.fingerprint(), c.fingerprint());
}

TEST(SimulateForward, CsvDumpHasHeaderAndOneRowPerEntry) {
    LevyModel model{2, 1, {0.0, 0.0}, {1.0, 0.5}, {}};
    const auto ens = simulate_forward(model, TimeGrid::uniform(1, 3), 4, 1);
    std::ostringstream os;
    ens.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "path,step,component,X");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 4u * 4u * 2u);
}
