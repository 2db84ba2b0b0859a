#include <cmath>

#include <gtest/gtest.h>

#include "l1bsde/bsde.hpp"
#include "l1bsde/expression.hpp"
#include "l1bsde/scalar_solve.hpp"

using namespace l1bsde;

namespace {

std::vector<double> squared(const BrownianLattice& l) {
    return terminal_values(l, [](std::span<const double> b) { return b[0] * b[0]; });
}

} // namespace

TEST(Bsde, MartingaleExactForAnyStepCount) {
    for (std::size_t n : {1U, 3U, 16U, 100U}) {
        const BrownianLattice l(TimeGrid(1.0, n), 1);
        const auto q = solve_bsde(l, squared(l), zero_generator());
        EXPECT_NEAR(q.y0(), 1.0, 1e-12) << n;
        // Z of B^2 at the root is (dt - dt)/(2 sqrt dt) = 0; at node i it is 2 B + 0.
        EXPECT_NEAR(q.Z.at(0, 0)[0], 0.0, 1e-12);
    }
}

TEST(Bsde, LinearDriverConvergesAtFirstOrder) {
    double err[2];
    int j = 0;
    for (std::size_t n : {256U, 512U}) {
        const BrownianLattice l(TimeGrid(1.0, n), 1);
        err[j++] = std::fabs(solve_bsde(l, std::vector<double>(n + 1, 1.0), affine_generator(0.5)).y0() - std::exp(0.5));
    }
    EXPECT_LT(err[1], 5e-3);
    EXPECT_NEAR(err[0] / err[1], 2.0, 0.3);
}

TEST(Bsde, ForcingAddsItsIntegral) {
    const BrownianLattice l(TimeGrid(2.0, 10), 1);
    const auto V = ForcingTerm::from_rate(l, [](double, std::span<const double>) { return 0.75; });
    EXPECT_NEAR(solve_bsde(l, squared(l), zero_generator(), V).y0(), 2.0 + 1.5, 1e-12);
}

TEST(Bsde, TwoDimensionalProduct) {
    const BrownianLattice l(TimeGrid(1.0, 12), 2);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return b[0] * b[1] + b[1]; });
    const auto q = solve_bsde(l, xi, zero_generator());
    EXPECT_NEAR(q.y0(), 0.0, 1e-13);
    EXPECT_NEAR(q.Z.at(0, 0)[0], 0.0, 1e-13);
    EXPECT_NEAR(q.Z.at(0, 0)[1], 1.0, 1e-13);
}

// g = -y^3 + 1 has the stationary point y = 1.
TEST(Bsde, NonlinearStationaryPoint) {
    const BrownianLattice l(TimeGrid(1.0, 32), 1);
    const auto g = expression_generator(Expression::parse("-y^3 + 1"), 1.0);
    const auto q = solve_bsde(l, std::vector<double>(33, 1.0), g);
    EXPECT_NEAR(q.y0(), 1.0, 1e-12);
    EXPECT_LE(q.diagnostics.max_residual, 1e-12);
}

TEST(Bsde, NonContractionRefused) {
    const BrownianLattice l(TimeGrid(1.0, 4), 1);
    try {
        solve_bsde(l, std::vector<double>(5, 1.0), affine_generator(8.0));
        FAIL();
    } catch (const NonContractionError& e) {
        EXPECT_EQ(e.code(), ErrorCode::non_contraction);
    }
    NumericsConfig cfg;
    cfg.enforce_contraction = false;
    // Bracketing still finds the root y = E / (1 - a dt) with a dt = 2.
    const auto q = solve_bsde(l, std::vector<double>(5, 1.0), affine_generator(8.0), {}, cfg);
    EXPECT_TRUE(std::isfinite(q.y0()));
    EXPECT_NEAR(q.y0(), std::pow(-1.0, 4), 1e-9);
}

TEST(Bsde, NonFiniteTerminalRejected) {
    const BrownianLattice l(TimeGrid(1.0, 2), 1);
    EXPECT_THROW(solve_bsde(l, {0.0, std::nan(""), 0.0}, zero_generator()), Error);
    EXPECT_THROW(solve_bsde(l, {0.0, 0.0}, zero_generator()), Error);
}

TEST(ScalarSolve, PicardThenBracketing) {
    RootConfig rc;
    // Contraction: y = 1 + 0.5 sin(y).
    const auto a = solve_fixed_point([](double y) { return 1.0 + 0.5 * std::sin(y); }, 0.0, rc);
    EXPECT_TRUE(a.converged);
    EXPECT_NEAR(a.y, 1.0 + 0.5 * std::sin(a.y), 1e-14);
    // Expansive: y = 3 - 2 y has the root 1 but Picard diverges.
    const auto b = solve_fixed_point([](double y) { return 3.0 - 2.0 * y; }, 0.0, rc);
    EXPECT_TRUE(b.converged);
    EXPECT_TRUE(b.bracketed);
    EXPECT_NEAR(b.y, 1.0, 1e-12);
}
