#include <cmath>

#include <gtest/gtest.h>

#include "l1bsde/analysis.hpp"
#include "l1bsde/catalog.hpp"

using namespace l1bsde;

namespace {

std::vector<double> squared(const BrownianLattice& l) {
    return terminal_values(l, [](std::span<const double> b) { return b[0] * b[0]; });
}

NodeProcess flat(const BrownianLattice& l, double v, const std::vector<double>& xi, bool lower) {
    const std::size_t n = l.n_steps();
    return l.make_process([&](std::size_t k, std::size_t i, std::span<const double>) {
        return k == n ? (lower ? std::min(v, xi[i]) : std::max(v, xi[i])) : v;
    });
}

BarrierPair cosine_pair(const BrownianLattice& l, const std::vector<double>& xi, double lo, double hi, bool use_lo,
                        bool use_hi) {
    const std::size_t n = l.n_steps();
    auto make = [&](double level, bool lower) {
        return l.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
            const double v = level + 0.1 * std::cos(b[0]);
            return k == n ? (lower ? std::min(v, xi[i]) : std::max(v, xi[i])) : v;
        });
    };
    return {use_lo ? Barrier::lower(make(lo, true)) : Barrier::absent(BarrierSide::lower),
            use_hi ? Barrier::upper(make(hi, false)) : Barrier::absent(BarrierSide::upper)};
}

} // namespace

// Dyadic instance: every value is exact in binary, so the residual is exactly zero.
TEST(Mokobodzki, DyadicWitnessClosesExactly) {
    const BrownianLattice l(TimeGrid(1.0, 4), 1);
    const auto xi = squared(l);
    const BarrierPair bp{Barrier::lower(flat(l, 1.5, xi, true)), Barrier::upper(flat(l, 3.0, xi, false))};
    const auto w = mokobodzki_check(l, xi, zero_generator(), {}, bp, WitnessStrategy::use_drbsde_solution);
    EXPECT_TRUE(w.sandwich_ok);
    EXPECT_EQ(w.decomposition_residual, 0.0);
    EXPECT_DOUBLE_EQ(w.c_variation, 0.75);
    EXPECT_EQ(w.g_at_X_norm, 0.0);
}

TEST(Mokobodzki, UserWitnessOutsideBarriersIsLocated) {
    const BrownianLattice l(TimeGrid(1.0, 4), 1);
    const auto xi = squared(l);
    const auto lower = flat(l, 1.5, xi, true);
    const BarrierPair bp{Barrier::lower(lower), Barrier::upper(flat(l, 3.0, xi, false))};
    const auto good = mokobodzki_check(l, xi, zero_generator(), {}, bp, WitnessStrategy::user_supplied, {}, &lower);
    EXPECT_TRUE(good.sandwich_ok);
    const auto zero = l.zeros();
    const auto bad = mokobodzki_check(l, xi, zero_generator(), {}, bp, WitnessStrategy::user_supplied, {}, &zero);
    EXPECT_FALSE(bad.sandwich_ok);
    ASSERT_TRUE(bad.sandwich_violation.has_value());
    EXPECT_EQ(bad.sandwich_violation->step, 0U);
    EXPECT_THROW(mokobodzki_check(l, xi, zero_generator(), {}, bp, WitnessStrategy::user_supplied), Error);
}

// With 2^d branches and d+1 degrees of freedom the d = 2 lattice cannot
// represent every martingale, so the orthogonal part shows up as residual.
TEST(Mokobodzki, TwoDimensionalResidualIsReported) {
    const BrownianLattice l(TimeGrid(1.0, 8), 2);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return b[0] * b[1]; });
    const auto w = mokobodzki_check(l, xi, zero_generator(), {}, BarrierPair{}, WitnessStrategy::use_drbsde_solution);
    EXPECT_NEAR(w.decomposition_residual, 0.125, 1e-12);
}

TEST(Comparison, BatteryOnRandomCases) {
    const auto cases = generate_comparison_cases(200, 7);
    ASSERT_EQ(cases.size(), 200U);
    const auto r = comparison_battery(cases);
    EXPECT_EQ(r.errors, 0U);
    EXPECT_EQ(r.lipschitz_y_pass, r.lipschitz_cases);
    EXPECT_EQ(r.increment_pass, r.equal_barrier_cases);
    EXPECT_GT(r.equal_barrier_cases, 20U);
    EXPECT_EQ(r.osgood_confirmed, 0U);
    EXPECT_EQ(r.osgood_cases, 20U);
    EXPECT_TRUE(r.all_ok());
    // Same seed, same cases.
    const auto again = generate_comparison_cases(200, 7);
    for (std::size_t j = 0; j < cases.size(); ++j) {
        EXPECT_EQ(cases[j].id, again[j].id);
        EXPECT_EQ(cases[j].n_steps, again[j].n_steps);
    }
}

// Reversed data (xi1 > xi2) must be caught and the stored evidence must confirm it.
TEST(Comparison, ReversedDataFails) {
    ComparisonCase c;
    c.id = "reversed";
    c.n_steps = 8;
    c.xi1 = std::vector<double>(9, 1.0);
    c.xi2 = std::vector<double>(9, 0.0);
    c.g1 = affine_generator(0.1);
    c.g2 = affine_generator(0.1);
    const auto o = run_comparison_case(c, ComparisonConfig{});
    EXPECT_EQ(o.verdict, Verdict::fail);
    EXPECT_FALSE(o.y_ok);
    ASSERT_TRUE(o.evidence.has_value());
    EXPECT_TRUE(reverify_failure(o));
    std::swap(c.xi1, c.xi2);
    EXPECT_EQ(run_comparison_case(c, ComparisonConfig{}).verdict, Verdict::pass);
}

TEST(Uniqueness, LipschitzDriverWithBarriers) {
    const BrownianLattice l(TimeGrid(1.0, 32), 1);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return std::sin(b[0]); });
    const auto g = affine_generator(-0.5, {0.3}, 0.1);
    const auto single = uniqueness_probe(l, xi, g, {}, cosine_pair(l, xi, -0.5, 0.5, true, false));
    EXPECT_TRUE(single.in_class);
    EXPECT_EQ(single.verdict, Verdict::pass) << single.note;
    EXPECT_LE(single.direct_deviation, 1e-11);
    const auto both = uniqueness_probe(l, xi, g, {}, cosine_pair(l, xi, -0.5, 0.5, true, true));
    EXPECT_EQ(both.verdict, Verdict::pass) << both.note;
    EXPECT_LE(both.ladder_deviation, 2e-2);
}

TEST(Uniqueness, OutOfClassIsInconclusive) {
    const BrownianLattice l(TimeGrid(1.0, 32), 1);
    const auto g = expression_generator(Expression::parse("2*sqrt(abs(y))"), 1.0);
    const auto u = uniqueness_probe(l, std::vector<double>(33, 0.0), g, {}, BarrierPair{});
    EXPECT_FALSE(u.in_class);
    EXPECT_EQ(u.verdict, Verdict::inconclusive);
}

TEST(Approximation, SupConvolutionOfExample73WithUpperBarrier) {
    const BrownianLattice l(TimeGrid(1.0, 16), 1);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return std::sin(b[0]); });
    const auto [g1, g2] = *catalog_split("ex7.3");
    ApproximationConfig cfg;
    const auto r = approximation_battery(l, xi, {}, cosine_pair(l, xi, 0.0, 25.0, false, true),
                                         convolution_sequence(g1, g2, ConvolutionDirection::maximal),
                                         SequenceDirection::nonincreasing, {1, 2, 4, 8, 16, 32, 64}, cfg);
    EXPECT_EQ(r.y_violations + r.k_violations + r.a_violations, 0U);
    EXPECT_TRUE(r.gaps_nonincreasing);
    EXPECT_GT(r.entries.front().solution.y0(), r.entries.back().solution.y0());
}

TEST(Approximation, Example72DoubleBarrier) {
    const BrownianLattice l(TimeGrid(0.25, 16), 1);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return std::sin(b[0]); });
    const auto [g1, g2] = *catalog_split("ex7.2");
    const auto r = approximation_battery(l, xi, {}, cosine_pair(l, xi, -0.8, 0.8, true, true),
                                         convolution_sequence(g1, g2, ConvolutionDirection::maximal),
                                         SequenceDirection::nonincreasing, {1, 2, 4, 8, 16}, ApproximationConfig{});
    EXPECT_EQ(r.y_violations + r.k_violations + r.a_violations, 0U);
}

TEST(Approximation, ConstantSequenceHasZeroGaps) {
    const BrownianLattice l(TimeGrid(1.0, 8), 1);
    const auto xi = squared(l);
    const auto g = affine_generator(0.2);
    const auto r = approximation_battery(l, xi, {}, BarrierPair{}, [&](double) { return g; },
                                         SequenceDirection::nondecreasing, {1, 2, 4}, ApproximationConfig{});
    for (const auto& e : r.entries) {
        EXPECT_EQ(e.gaps.sup_y, 0.0);
    }
}
