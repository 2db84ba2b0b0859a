#include <cmath>

#include <gtest/gtest.h>

#include "l1bsde/penalization.hpp"
#include "l1bsde/reflected.hpp"

using namespace l1bsde;

namespace {

struct Snell {
    BrownianLattice lattice{TimeGrid(1.0, 32), 1};
    std::vector<double> xi = terminal_values(lattice, [](std::span<const double> b) { return b[0] * b[0]; });
    Barrier lower = Barrier::lower(lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double>) {
        return k == 32 ? std::min(0.5, xi[i]) : 0.5;
    }));
};

BarrierPair bounded_pair(const BrownianLattice& l, const std::vector<double>& xi) {
    const std::size_t n = l.n_steps();
    auto lo = l.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
        const double v = -0.3 + 0.2 * std::cos(b[0]);
        return k == n ? std::min(v, xi[i]) : v;
    });
    auto up = l.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
        const double v = 0.4 + 0.2 * std::sin(b[0]);
        return k == n ? std::max(v, xi[i]) : v;
    });
    return {Barrier::lower(std::move(lo)), Barrier::upper(std::move(up))};
}

} // namespace

TEST(Reflected, LowerMatchesSnellOracle) {
    Snell s;
    const auto q = solve_rbsde_lower(s.lattice, s.xi, zero_generator(), {}, s.lower);
    EXPECT_LE(norms::sup_node_gap(q.Y, snell_oracle(s.lattice, s.xi, s.lower)), 1e-12);
    const auto fo = flat_off_report(s.lattice, q, {s.lower, Barrier::absent(BarrierSide::upper)});
    EXPECT_EQ(fo.max_kl_product, 0.0);
    EXPECT_GT(detail::expected_total(s.lattice, q.dK), 0.0);
    for (std::size_t k = 0; k < 32; ++k) {
        for (std::size_t i = 0; i < s.lattice.node_count(k); ++i) {
            EXPECT_GE(q.Y.at(k, i), 0.5);
        }
    }
}

TEST(Reflected, DoubleMatchesDynkinOracle) {
    const BrownianLattice l(TimeGrid(1.0, 24), 1);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return std::sin(2.0 * b[0]); });
    const auto bp = bounded_pair(l, xi);
    const auto q = solve_drbsde(l, xi, zero_generator(), {}, bp);
    EXPECT_LE(norms::sup_node_gap(q.Y, dynkin_oracle(l, xi, bp)), 1e-12);
    const auto fo = flat_off_report(l, q, bp);
    EXPECT_EQ(fo.ortho_violations, 0U);
    EXPECT_EQ(fo.max_kl_product, 0.0);
    EXPECT_EQ(fo.max_ua_product, 0.0);
}

TEST(Reflected, UpperIsMirrorOfLower) {
    Snell s;
    const auto upper = negated(s.lower);
    const auto a = solve_rbsde_lower(s.lattice, s.xi, zero_generator(), {}, s.lower);
    const auto b = solve_rbsde_upper(s.lattice, negated(s.xi), zero_generator(), {}, upper);
    EXPECT_LE(norms::sup_node_gap(a.Y, negated(b.Y)), 1e-14);
}

TEST(Reflected, CrossedBarriersNameTheNode) {
    const BrownianLattice l(TimeGrid(1.0, 4), 1);
    auto lo = l.make_process([](std::size_t k, std::size_t i, std::span<const double>) {
        return k == 2 && i == 1 ? 2.0 : 0.0;
    });
    auto up = l.make_process([](std::size_t, std::size_t, std::span<const double>) { return 1.0; });
    try {
        solve_drbsde(l, std::vector<double>(5, 0.5), zero_generator(), {},
                     {Barrier::lower(std::move(lo)), Barrier::upper(std::move(up))});
        FAIL();
    } catch (const NodeError& e) {
        EXPECT_EQ(e.code(), ErrorCode::crossed_barriers);
        EXPECT_EQ(e.where().step, 2U);
        EXPECT_EQ(e.where().node, 1U);
    }
}

TEST(Reflected, TerminalBelowBarrierRejected) {
    const BrownianLattice l(TimeGrid(1.0, 4), 1);
    auto lo = l.make_process([](std::size_t, std::size_t, std::span<const double>) { return 1.0; });
    EXPECT_THROW(solve_rbsde_lower(l, std::vector<double>(5, 0.0), zero_generator(), {}, Barrier::lower(std::move(lo))),
                 Error);
}

// Implicit penalized step at a node with E < L gives (E + n dt L) / (1 + n dt),
// so the worst gap at n = 1024 is (L - E) / 33 with L - E = 7/16.
TEST(Penalization, LowerLadderOnSnellInstance) {
    Snell s;
    LadderConfig cfg;
    cfg.throw_on_violation = false;
    const auto ladder = penalization_ladder_lower(s.lattice, s.xi, zero_generator(), {}, s.lower,
                                                  {1, 4, 16, 64, 256, 1024}, cfg);
    EXPECT_EQ(ladder.monotonicity_violations, 0U);
    EXPECT_TRUE(ladder.gaps_nonincreasing);
    const auto& last = ladder.entries.back().gaps;
    EXPECT_NEAR(last.sup_y, 0.4375 / 33.0, 1e-12);
    EXPECT_LE(last.sup_k, 5e-2);
    for (std::size_t j = 1; j < ladder.entries.size(); ++j) {
        EXPECT_LE(ladder.entries[j].gaps.sup_y, ladder.entries[j - 1].gaps.sup_y);
    }
}

TEST(Penalization, MixedVariantsAgreeAndSandwich) {
    const BrownianLattice l(TimeGrid(1.0, 32), 1);
    const auto xi = terminal_values(l, [](std::span<const double> b) { return std::sin(2.0 * b[0]) + 0.5 * b[0]; });
    const auto bp = bounded_pair(l, xi);
    const auto g = affine_generator(0.3, {0.2}, 0.1);
    LadderConfig cfg;
    for (auto v : {MixedVariant::via_upper_rbsde, MixedVariant::via_lower_rbsde, MixedVariant::via_bsde}) {
        const auto ladder = penalization_ladder_mixed(l, xi, g, {}, bp, {1, 4, 16, 64, 256, 1024}, v, cfg);
        EXPECT_EQ(ladder.monotonicity_violations, 0U) << to_string(v);
        EXPECT_EQ(ladder.sandwich_violations, 0U) << to_string(v);
        EXPECT_LE(std::fabs(ladder.limit().y0() - ladder.reference.y0()), 2e-2) << to_string(v);
    }
}

TEST(Penalization, ScheduleMustIncrease) {
    Snell s;
    EXPECT_THROW(penalization_ladder_lower(s.lattice, s.xi, zero_generator(), {}, s.lower, {4, 2}), Error);
    EXPECT_THROW(penalization_ladder_lower(s.lattice, s.xi, zero_generator(), {}, s.lower, {}), Error);
}
