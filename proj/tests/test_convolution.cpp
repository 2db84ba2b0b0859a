#include <cmath>

#include <gtest/gtest.h>

#include "l1bsde/catalog.hpp"
#include "l1bsde/convolution.hpp"
#include "l1bsde/expression.hpp"

using namespace l1bsde;

namespace {

double at(const GeneratorSpec& g, double y, double z, double b = 0.0) {
    const EvalPoint p{0.0, 0, 0, std::span<const double>(&b, 1)};
    return g(p, y, std::span<const double>(&z, 1));
}

GeneratorSpec parsed(const char* text) { return expression_generator(Expression::parse(text), 1.0); }

std::vector<double> sine_xi(const BrownianLattice& l) {
    return terminal_values(l, [](std::span<const double> b) { return std::sin(b[0]); });
}

} // namespace

// inf_u u^2 + 4|u - z|: the Moreau envelope with the Huber shape 4|z| - 4 beyond |z| = 2.
TEST(Regularizer, MoreauOracle) {
    const auto g = inf_convolve_z(parsed("z^2"), 4.0, 0.0, 1.0);
    EXPECT_NEAR(at(g, 0.0, 0.0), 0.0, 1e-3);
    EXPECT_NEAR(at(g, 0.0, 1.0), 1.0, 1e-3);
    EXPECT_NEAR(at(g, 0.0, 3.0), 8.0, 1e-3);
    EXPECT_NEAR(at(g, 0.0, -5.0), 16.0, 1e-3);
}

TEST(Regularizer, HoelderDriverIsAFixedPoint) {
    const auto root = parsed("sqrt(abs(z))");
    const auto inf = inf_convolve_z(root, 1.0, 0.0, 0.5);
    const auto sup = sup_convolve_z(root, 1.0, 0.0, 0.5);
    // Subadditivity of the square root makes this exact; the search may
    // still land on sqrt(u) - sqrt(u) with one rounding left over.
    for (double z : {-4.0, -0.5, 0.0, 0.01, 1.0, 9.0}) {
        EXPECT_NEAR(at(inf, 0.0, z), at(root, 0.0, z), 1e-15);
        EXPECT_NEAR(at(sup, 0.0, z), at(root, 0.0, z), 1e-15);
    }
}

TEST(Regularizer, OrderedAndMonotoneInN) {
    const auto g = parsed("z^2 - y^3");
    double prev_inf = -HUGE_VAL, prev_sup = HUGE_VAL;
    for (double n : {1.0, 2.0, 8.0, 32.0, 128.0}) {
        const double lo = at(inf_convolve_z(g, n, 0.0, 1.0), 0.5, 2.5);
        const double hi = at(sup_convolve_z(g, n, 0.0, 1.0), 0.5, 2.5);
        EXPECT_LE(lo, at(g, 0.5, 2.5));
        EXPECT_GE(hi, at(g, 0.5, 2.5));
        EXPECT_GE(lo, prev_inf);
        EXPECT_LE(hi, prev_sup);
        prev_inf = lo;
        prev_sup = hi;
    }
}

TEST(Regularizer, JointConvolutionIsLipschitzInY) {
    const auto g = parsed("-y^3");
    const auto r = inf_convolve_yz(g, 2.0, 0.0, 0.0, 0.5);
    // Constant 2 in y: slopes never exceed it even where y^3 is steep.
    for (double y : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        EXPECT_LE(std::fabs(at(r, y + 0.1, 0.0) - at(r, y, 0.0)), 2.0 * 0.1 + 1e-3);
        EXPECT_LE(at(r, y, 0.0), at(g, y, 0.0) + 1e-12);
    }
    EXPECT_THROW(inf_convolve_z(g, 1.0, 0.0, 1.5), Error);
}

TEST(Convolution, Example72MinimalIsMonotone) {
    const auto [g1, g2] = *catalog_split("ex7.2");
    const BrownianLattice l(TimeGrid(0.25, 16), 1);
    const auto res = solve_minimal_via_convolution(l, sine_xi(l), g1, g2, {}, {1, 2, 4, 8, 16});
    EXPECT_EQ(res.monotonicity_violations, 0U);
    EXPECT_TRUE(std::isfinite(res.limit().y0()));
}

TEST(Convolution, Example73CauchyGap) {
    const auto [g1, g2] = *catalog_split("ex7.3");
    const BrownianLattice l(TimeGrid(0.25, 64), 1);
    ConvolutionConfig cfg;
    cfg.throw_on_violation = false;
    const auto res = solve_minimal_via_convolution(l, sine_xi(l), g1, g2, {}, {1, 2, 4, 8, 16}, cfg);
    EXPECT_EQ(res.monotonicity_violations, 0U);
    EXPECT_LE(res.cauchy_gap, 1e-3);
}

TEST(Convolution, MissingParametersReported) {
    try {
        regularized_driver(zero_generator(), GeneratorSpec{}, 1.0, ConvolutionDirection::minimal, SearchConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_parameter);
    }
}
