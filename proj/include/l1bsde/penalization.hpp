#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "l1bsde/norms.hpp"
#include "l1bsde/reflected.hpp"
#include "l1bsde/regularize.hpp"

namespace l1bsde {

struct LadderConfig {
    NumericsConfig numerics;
    NormConfig norms;
    /// Steps with n dt at or above this skip Picard and bracket directly.
    double stiff_threshold = 0.5;
    /// A monotonicity or sandwich violation is a wrong-way move larger than this.
    double monotone_tol = 1e-10;
    bool throw_on_violation = true;
};

/// Distances from one ladder entry to the direct-scheme solution.
struct GapNorms {
    double sup_y = 0.0;
    double s_beta_y = 0.0;
    double m_beta_z = 0.0;
    double s_beta_k = 0.0;
    double s_beta_a = 0.0;
    /// sup over all paths and times of |K^n - K| (resp. A).
    double sup_k = 0.0;
    double sup_a = 0.0;
};

struct LadderEntry {
    double n = 0.0;
    SolutionQuadruple solution;
    GapNorms gaps;
    double k_total = 0.0;
    double a_total = 0.0;
};

enum class MixedVariant { via_upper_rbsde, via_lower_rbsde, via_bsde };

inline const char* to_string(MixedVariant v) {
    switch (v) {
    case MixedVariant::via_upper_rbsde: return "via_upper_rbsde";
    case MixedVariant::via_lower_rbsde: return "via_lower_rbsde";
    case MixedVariant::via_bsde: return "via_bsde";
    }
    return "?";
}

struct PenalizationLadder {
    std::string variant;
    std::vector<LadderEntry> entries;
    SolutionQuadruple reference;
    /// Nodes where Y^n moved against the expected direction.
    std::size_t monotonicity_violations = 0;
    double worst_monotonicity = 0.0;
    /// Nodes outside lower-ladder <= Y^n <= upper-ladder (via_bsde only).
    std::size_t sandwich_violations = 0;
    double worst_sandwich = 0.0;
    bool gaps_nonincreasing = true;

    const SolutionQuadruple& limit() const { return entries.back().solution; }
};

namespace detail {

enum class Direction { up, down, none };

inline void check_schedule(const std::vector<double>& schedule) {
    if (schedule.empty()) {
        throw Error(ErrorCode::invalid_argument, "empty penalization schedule");
    }
    for (std::size_t j = 0; j < schedule.size(); ++j) {
        if (!(schedule[j] >= 0.0) || (j > 0 && !(schedule[j] > schedule[j - 1]))) {
            throw Error(ErrorCode::invalid_argument, "schedule must be nonnegative and strictly increasing");
        }
    }
}

inline NumericsConfig numerics_for(const LadderConfig& cfg, double n, double dt) {
    NumericsConfig num = cfg.numerics;
    if (n * dt >= cfg.stiff_threshold) {
        num.force_bracketing = true;
    }
    return num;
}

/// n (Y - L)^- dt per node, charged over (t_k, t_{k+1}].
inline NodeProcess lower_penalty_increments(const BrownianLattice& lattice, const NodeProcess& y, const Barrier& l,
                                            double n) {
    NodeProcess out = lattice.zeros();
    if (!l.present()) {
        return out;
    }
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            out.at(k, i) = n * neg_part(y.at(k, i) - l.at(k, i)) * lattice.dt();
        }
    }
    return out;
}

inline NodeProcess upper_penalty_increments(const BrownianLattice& lattice, const NodeProcess& y, const Barrier& u,
                                            double n) {
    NodeProcess out = lattice.zeros();
    if (!u.present()) {
        return out;
    }
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            out.at(k, i) = n * pos_part(y.at(k, i) - u.at(k, i)) * lattice.dt();
        }
    }
    return out;
}

inline double expected_total(const BrownianLattice& lattice, const NodeProcess& d) {
    double s = 0.0;
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        const auto w = lattice.node_weights(k);
        for (std::size_t i = 0; i < w.size(); ++i) {
            s += w[i] * d.at(k, i);
        }
    }
    return s;
}

inline GapNorms gap_norms(const BrownianLattice& lattice, const SolutionQuadruple& a, const SolutionQuadruple& ref,
                          const PathSet& paths, double beta) {
    GapNorms g;
    const auto dy = norms::difference(a.Y, ref.Y);
    const auto dz = norms::difference(a.Z, ref.Z);
    const auto dk = norms::difference(a.dK, ref.dK);
    const auto da = norms::difference(a.dA, ref.dA);
    g.sup_y = norms::sup_node_gap(a.Y, ref.Y);
    g.s_beta_y = norms::weighted_power_mean(norms::path_sup(dy, paths), paths, beta);
    g.m_beta_z = norms::weighted_power_mean(norms::path_quadratic(dz, paths, lattice.dt()), paths, 0.5 * beta);
    g.s_beta_k = norms::weighted_power_mean(norms::path_sup_cumulative(dk, paths), paths, beta);
    g.s_beta_a = norms::weighted_power_mean(norms::path_sup_cumulative(da, paths), paths, beta);
    g.sup_k = norms::lattice_sup_cumulative(lattice, dk);
    g.sup_a = norms::lattice_sup_cumulative(lattice, da);
    return g;
}

/// Counts nodes where `later` moved against `dir` relative to `earlier`.
inline void count_direction(const NodeProcess& earlier, const NodeProcess& later, Direction dir, double tol,
                            std::size_t& count, double& worst) {
    if (dir == Direction::none) {
        return;
    }
    for (std::size_t k = 0; k < earlier.step_count(); ++k) {
        for (std::size_t i = 0; i < earlier.size(k); ++i) {
            const double move = later.at(k, i) - earlier.at(k, i);
            const double wrong = dir == Direction::up ? -move : move;
            if (wrong > tol * std::max(1.0, std::fabs(earlier.at(k, i)))) {
                ++count;
                worst = std::max(worst, wrong);
            }
        }
    }
}

inline bool last_three_nonincreasing(const std::vector<LadderEntry>& e) {
    if (e.size() < 2) {
        return true;
    }
    const std::size_t from = e.size() >= 3 ? e.size() - 3 : 0;
    auto fields = [](const GapNorms& g) {
        return std::vector<double>{g.sup_y, g.s_beta_y, g.m_beta_z, g.s_beta_k, g.s_beta_a};
    };
    for (std::size_t j = from + 1; j < e.size(); ++j) {
        const auto prev = fields(e[j - 1].gaps);
        const auto cur = fields(e[j].gaps);
        for (std::size_t f = 0; f < cur.size(); ++f) {
            if (cur[f] > prev[f] * (1.0 + 1e-9) + 1e-14) {
                return false;
            }
        }
    }
    return true;
}

using EntrySolver = std::function<SolutionQuadruple(double n, const NumericsConfig&)>;

inline PenalizationLadder run_ladder(const BrownianLattice& lattice, const std::vector<double>& schedule,
                                     std::string variant, const EntrySolver& solve, SolutionQuadruple reference,
                                     Direction dir, const LadderConfig& cfg) {
    check_schedule(schedule);
    PenalizationLadder ladder;
    ladder.variant = std::move(variant);
    ladder.reference = std::move(reference);
    ladder.entries.resize(schedule.size());
    const auto paths = PathSet::for_lattice(lattice, cfg.norms.path_samples, cfg.norms.seed);
    // Entries are independent; run them side by side, then check order.
    const std::size_t outer = std::min(cfg.numerics.threads, schedule.size());
    parallel_for(schedule.size(), outer > 1 ? outer : 1, [&](std::size_t j) {
        const double n = schedule[j];
        NumericsConfig num = numerics_for(cfg, n, lattice.dt());
        if (outer > 1) {
            num.threads = 1;
        }
        LadderEntry e;
        e.n = n;
        e.solution = solve(n, num);
        e.gaps = gap_norms(lattice, e.solution, ladder.reference, paths, cfg.norms.beta);
        e.k_total = expected_total(lattice, e.solution.dK);
        e.a_total = expected_total(lattice, e.solution.dA);
        ladder.entries[j] = std::move(e);
    });
    for (std::size_t j = 1; j < ladder.entries.size(); ++j) {
        count_direction(ladder.entries[j - 1].solution.Y, ladder.entries[j].solution.Y, dir, cfg.monotone_tol,
                        ladder.monotonicity_violations, ladder.worst_monotonicity);
    }
    ladder.gaps_nonincreasing = last_three_nonincreasing(ladder.entries);
    if (cfg.throw_on_violation) {
        if (ladder.monotonicity_violations > 0) {
            throw Error(ErrorCode::monotonicity_violation,
                        ladder.variant + ": " + std::to_string(ladder.monotonicity_violations) +
                            " nodes moved against the penalization order (worst " +
                            std::to_string(ladder.worst_monotonicity) + ")");
        }
        if (!ladder.gaps_nonincreasing) {
            throw Error(ErrorCode::divergence, ladder.variant + ": gap norms grew over the last schedule entries");
        }
    }
    return ladder;
}

} // namespace detail

/// Penalized BSDEs with g + n (y - L)^-, compared against the direct lower-reflected scheme.
inline PenalizationLadder penalization_ladder_lower(const BrownianLattice& lattice, const std::vector<double>& xi,
                                                    const GeneratorSpec& g, const ForcingTerm& V, const Barrier& lower,
                                                    const std::vector<double>& schedule, const LadderConfig& cfg = {}) {
    auto reference = solve_rbsde_lower(lattice, xi, g, V, lower, cfg.numerics);
    auto solve = [&](double n, const NumericsConfig& num) {
        auto q = solve_bsde(lattice, xi, penalize_lower(g, lower, n), V, num);
        q.dK = detail::lower_penalty_increments(lattice, q.Y, lower, n);
        return q;
    };
    return detail::run_ladder(lattice, schedule, "lower", solve, std::move(reference), detail::Direction::up, cfg);
}

/// Penalized BSDEs with g - n (y - U)^+, compared against the direct upper-reflected scheme.
inline PenalizationLadder penalization_ladder_upper(const BrownianLattice& lattice, const std::vector<double>& xi,
                                                    const GeneratorSpec& g, const ForcingTerm& V, const Barrier& upper,
                                                    const std::vector<double>& schedule, const LadderConfig& cfg = {}) {
    auto reference = solve_rbsde_upper(lattice, xi, g, V, upper, cfg.numerics);
    auto solve = [&](double n, const NumericsConfig& num) {
        auto q = solve_bsde(lattice, xi, penalize_upper(g, upper, n), V, num);
        q.dA = detail::upper_penalty_increments(lattice, q.Y, upper, n);
        return q;
    };
    return detail::run_ladder(lattice, schedule, "upper", solve, std::move(reference), detail::Direction::down, cfg);
}

/// Plain BSDEs with both penalties, compared against the direct two-barrier scheme.
inline PenalizationLadder penalization_ladder_double(const BrownianLattice& lattice, const std::vector<double>& xi,
                                                     const GeneratorSpec& g, const ForcingTerm& V,
                                                     const BarrierPair& barriers, const std::vector<double>& schedule,
                                                     const LadderConfig& cfg = {}) {
    check_barrier_order(barriers.lower, barriers.upper);
    auto reference = solve_drbsde(lattice, xi, g, V, barriers, cfg.numerics);
    auto solve = [&](double n, const NumericsConfig& num) {
        auto q = solve_bsde(lattice, xi, penalize_double(g, barriers.lower, barriers.upper, n), V, num);
        q.dK = detail::lower_penalty_increments(lattice, q.Y, barriers.lower, n);
        q.dA = detail::upper_penalty_increments(lattice, q.Y, barriers.upper, n);
        return q;
    };
    return detail::run_ladder(lattice, schedule, "double", solve, std::move(reference), detail::Direction::none, cfg);
}

/**
 * Two-barrier ladders. via_upper_rbsde penalizes L inside upper-reflected
 * solves (Y nondecreasing in n); via_lower_rbsde penalizes U inside
 * lower-reflected solves (Y nonincreasing); via_bsde penalizes both and is
 * checked against the sandwich formed by the other two at the same n.
 */
inline PenalizationLadder penalization_ladder_mixed(const BrownianLattice& lattice, const std::vector<double>& xi,
                                                    const GeneratorSpec& g, const ForcingTerm& V,
                                                    const BarrierPair& barriers, const std::vector<double>& schedule,
                                                    MixedVariant variant, const LadderConfig& cfg = {}) {
    check_barrier_order(barriers.lower, barriers.upper);
    auto reference = solve_drbsde(lattice, xi, g, V, barriers, cfg.numerics);
    auto from_below = [&](double n, const NumericsConfig& num) {
        auto q = solve_rbsde_upper(lattice, xi, penalize_lower(g, barriers.lower, n), V, barriers.upper, num);
        q.dK = detail::lower_penalty_increments(lattice, q.Y, barriers.lower, n);
        return q;
    };
    auto from_above = [&](double n, const NumericsConfig& num) {
        auto q = solve_rbsde_lower(lattice, xi, penalize_upper(g, barriers.upper, n), V, barriers.lower, num);
        q.dA = detail::upper_penalty_increments(lattice, q.Y, barriers.upper, n);
        return q;
    };
    switch (variant) {
    case MixedVariant::via_upper_rbsde:
        return detail::run_ladder(lattice, schedule, to_string(variant), from_below, std::move(reference),
                                  detail::Direction::up, cfg);
    case MixedVariant::via_lower_rbsde:
        return detail::run_ladder(lattice, schedule, to_string(variant), from_above, std::move(reference),
                                  detail::Direction::down, cfg);
    case MixedVariant::via_bsde:
        break;
    }
    LadderConfig quiet = cfg;
    quiet.throw_on_violation = false;
    auto ladder = penalization_ladder_double(lattice, xi, g, V, barriers, schedule, quiet);
    ladder.variant = to_string(variant);
    for (std::size_t j = 0; j < schedule.size(); ++j) {
        const double n = schedule[j];
        const auto num = detail::numerics_for(cfg, n, lattice.dt());
        const auto lo = from_below(n, num);
        const auto hi = from_above(n, num);
        const auto& y = ladder.entries[j].solution.Y;
        for (std::size_t k = 0; k < y.step_count(); ++k) {
            for (std::size_t i = 0; i < y.size(k); ++i) {
                const double v = y.at(k, i);
                const double slack = cfg.monotone_tol * std::max(1.0, std::fabs(v));
                const double wrong = std::max(lo.Y.at(k, i) - v, v - hi.Y.at(k, i));
                if (wrong > slack) {
                    ++ladder.sandwich_violations;
                    ladder.worst_sandwich = std::max(ladder.worst_sandwich, wrong);
                }
            }
        }
    }
    if (cfg.throw_on_violation) {
        if (ladder.sandwich_violations > 0) {
            throw Error(ErrorCode::monotonicity_violation,
                        "via_bsde: " + std::to_string(ladder.sandwich_violations) + " nodes outside the sandwich");
        }
        if (!ladder.gaps_nonincreasing) {
            throw Error(ErrorCode::divergence, "via_bsde: gap norms grew over the last schedule entries");
        }
    }
    return ladder;
}

} // namespace l1bsde
