#include <cmath>

#include <gtest/gtest.h>

#include "l1bsde/bsde.hpp"
#include "l1bsde/bsde_mc.hpp"
#include "l1bsde/expression.hpp"
#include "l1bsde/norms.hpp"

using namespace l1bsde;

namespace {

RegressionConfig small_bootstrap() {
    RegressionConfig cfg;
    cfg.bootstrap = 50;
    return cfg;
}

} // namespace

TEST(MonteCarlo, ConstantTerminalIsExact) {
    const PathBundle b(TimeGrid(1.0, 8), 1, 500, 3);
    const auto s = solve_bsde_mc(b, std::vector<double>(500, 2.5), zero_generator(), {}, small_bootstrap());
    EXPECT_EQ(s.y0, 2.5);
    EXPECT_EQ(s.z0[0], 0.0);
    EXPECT_EQ(s.y0_se, 0.0);
}

TEST(MonteCarlo, SquaredBrownianWithinStandardErrors) {
    const PathBundle b(TimeGrid(1.0, 16), 1, 20000, 5);
    const auto xi = terminal_values(b, [](std::span<const double> x) { return x[0] * x[0]; });
    const auto s = solve_bsde_mc(b, xi, zero_generator(), {}, small_bootstrap());
    EXPECT_GT(s.y0_se, 0.0);
    EXPECT_LE(std::fabs(s.y0 - 1.0), 4.0 * s.y0_se);
    EXPECT_LT(s.y0_se, 2e-2);
    EXPECT_TRUE(std::isfinite(s.worst_condition));
}

TEST(MonteCarlo, BitwiseRepeatable) {
    const auto run = [] {
        const PathBundle b(TimeGrid(1.0, 8), 1, 2000, 42);
        const auto xi = terminal_values(b, [](std::span<const double> x) { return std::sin(x[0]); });
        return solve_bsde_mc(b, xi, affine_generator(-0.5, {0.2}), {}, small_bootstrap());
    };
    const auto a = run();
    const auto c = run();
    EXPECT_EQ(a.y0, c.y0);
    EXPECT_EQ(a.y0_se, c.y0_se);
    EXPECT_EQ(norms::sup_node_gap(a.Y, c.Y), 0.0);
}

TEST(MonteCarlo, TooFewPathsForTheBasis) {
    const PathBundle b(TimeGrid(1.0, 4), 1, 2, 1);
    RegressionConfig cfg = small_bootstrap();
    cfg.degree = 3;
    try {
        solve_bsde_mc(b, {0.0, 1.0}, zero_generator(), {}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::singular_regression);
    }
}

TEST(MonteCarlo, SizeMismatchRejected) {
    const PathBundle b(TimeGrid(1.0, 4), 1, 10, 1);
    EXPECT_THROW(solve_bsde_mc(b, std::vector<double>(9, 0.0), zero_generator()), Error);
    auto bad = std::vector<double>(10, 0.0);
    bad[3] = std::nan("");
    EXPECT_THROW(solve_bsde_mc(b, bad, zero_generator()), Error);
}

// Nonlinear driver: the Monte Carlo estimate agrees with the lattice within a few standard errors.
TEST(MonteCarlo, AgreesWithLattice) {
    const auto g = expression_generator(Expression::parse("-0.5*y + 0.2*z"), 1.0);
    const BrownianLattice l(TimeGrid(1.0, 16), 1);
    const auto ref = solve_bsde(l, terminal_values(l, [](std::span<const double> x) { return x[0] * x[0]; }), g);
    const PathBundle b(TimeGrid(1.0, 16), 1, 20000, 9);
    const auto s = solve_bsde_mc(b, terminal_values(b, [](std::span<const double> x) { return x[0] * x[0]; }), g, {},
                                 small_bootstrap());
    EXPECT_LE(std::fabs(s.y0 - ref.y0()), 4.0 * s.y0_se + 1e-2);
}
