#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "l1bsde/lattice.hpp"
#include "l1bsde/norms.hpp"
#include "l1bsde/path_bundle.hpp"
#include "l1bsde/philox.hpp"

using namespace l1bsde;

TEST(TimeGrid, RejectsBadInput) {
    EXPECT_THROW(TimeGrid(1.0, 0), Error);
    EXPECT_THROW(TimeGrid(0.0, 4), Error);
    EXPECT_THROW(TimeGrid(std::nan(""), 4), Error);
    const TimeGrid g(2.0, 8);
    EXPECT_DOUBLE_EQ(g.dt(), 0.25);
    EXPECT_DOUBLE_EQ(g.time(8), 2.0);
}

TEST(Lattice, ShapeAndDimensionLimit) {
    const BrownianLattice l1(TimeGrid(1.0, 5), 1);
    EXPECT_EQ(l1.node_count(0), 1U);
    EXPECT_EQ(l1.node_count(5), 6U);
    EXPECT_EQ(l1.branch_count(), 2U);
    const BrownianLattice l2(TimeGrid(1.0, 5), 2);
    EXPECT_EQ(l2.node_count(3), 16U);
    EXPECT_EQ(l2.branch_count(), 4U);
    try {
        BrownianLattice(TimeGrid(1.0, 5), 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_too_large);
    }
}

TEST(Lattice, NodeWeightsAreBinomial) {
    const BrownianLattice l(TimeGrid(1.0, 6), 1);
    const auto w = l.node_weights(6);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(w[3], 20.0 / 64.0);
}

// E[B_{k+1}^2 | B_k] = B_k^2 + dt and Z of B is 1, exactly.
TEST(Lattice, ConditionalMomentsExact) {
    for (std::size_t d : {1U, 2U}) {
        const BrownianLattice l(TimeGrid(1.0, 8), d);
        const auto sq = l.make_process([](std::size_t, std::size_t, std::span<const double> b) {
            double s = 0.0;
            for (double x : b) {
                s += x * x;
            }
            return s;
        });
        const auto first = l.make_process([](std::size_t, std::size_t, std::span<const double> b) { return b[0]; });
        for (std::size_t k = 0; k < 8; ++k) {
            const auto e = conditional_expectation(l, sq.step(k + 1), k);
            const auto z = martingale_coefficient(l, first.step(k + 1), k);
            for (std::size_t i = 0; i < l.node_count(k); ++i) {
                EXPECT_NEAR(e[i], sq.at(k, i) + static_cast<double>(d) * l.dt(), 1e-13);
                EXPECT_NEAR(z[i * d], 1.0, 1e-13);
                if (d == 2) {
                    EXPECT_NEAR(z[i * d + 1], 0.0, 1e-13);
                }
            }
        }
    }
}

TEST(Lattice, StepInputChecked) {
    const BrownianLattice l(TimeGrid(1.0, 4), 1);
    std::vector<double> next(l.node_count(2), 0.0);
    EXPECT_THROW(conditional_expectation(l, next, 0), Error);
    EXPECT_THROW(conditional_expectation(l, next, 4), Error);
    next[1] = std::nan("");
    try {
        conditional_expectation(l, next, 1);
        FAIL();
    } catch (const NodeError& e) {
        EXPECT_EQ(e.code(), ErrorCode::sentinel_encountered);
    }
}

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::generate(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::generate(C{~0U, ~0U, ~0U, ~0U}, {~0U, ~0U}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(PathBundle, DeterministicAndCentred) {
    const TimeGrid g(1.0, 4);
    const auto a = sample_paths(g, 2, 20000, 99);
    const auto b = sample_paths(g, 2, 20000, 99);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == sample_paths(g, 2, 20000, 100));
    double mean = 0.0, var = 0.0;
    for (std::size_t m = 0; m < 20000; ++m) {
        const double x = a.state(4, m)[1];
        mean += x;
        var += x * x;
    }
    mean /= 20000.0;
    var /= 20000.0;
    EXPECT_NEAR(mean, 0.0, 0.03);
    EXPECT_NEAR(var, 1.0, 0.04);
}

TEST(Norms, ExactEnumerationOfSupremum) {
    // Two steps, d = 1: paths enumerate exactly; E[sup |B|] is computable by hand.
    const BrownianLattice l(TimeGrid(2.0, 2), 1);
    const auto paths = PathSet::for_lattice(l);
    EXPECT_TRUE(paths.exact());
    const auto b = l.make_process([](std::size_t, std::size_t, std::span<const double> s) { return s[0]; });
    const auto sup = norms::path_sup(b, paths);
    // Paths: uu (sup 2), ud (1), du (1), dd (2).
    EXPECT_NEAR(norms::weighted_power_mean(sup, paths, 1.0), 1.5, 1e-15);
}

TEST(Norms, SupNodeGap) {
    const NodeProcess a({{1.0}, {2.0, 3.0}});
    const NodeProcess b({{1.5}, {2.0, 2.0}});
    EXPECT_DOUBLE_EQ(norms::sup_node_gap(a, b), 1.0);
}
