#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "l1bsde/bsde.hpp"
#include "l1bsde/norms.hpp"
#include "l1bsde/regularize.hpp"

namespace l1bsde {

enum class ConvolutionDirection { minimal, maximal };

struct ConvolutionConfig {
    ConvolutionDirection direction = ConvolutionDirection::minimal;
    /// Solver-scale search grid; the regularizer defaults are far finer.
    // No golden pass here: a plain grid minimum is continuous in y, which the
    // implicit step needs to find an exact root.
    SearchConfig search{129, 33, 0.25, 1024.0, false, 48};
    NumericsConfig numerics{};
    double stiff_threshold = 0.5;
    /// Largest tolerated wrong-way move between consecutive iterates.
    double monotone_tol = 1e-6;
    bool throw_on_violation = true;
};

struct ConvolutionEntry {
    double n = 0.0;
    SolutionPair solution;
};

struct ConvolutionResult {
    std::vector<ConvolutionEntry> entries;
    std::size_t monotonicity_violations = 0;
    double worst_monotonicity = 0.0;
    NodeRef worst_node{};
    /// sup-node |Y^{n_last} - Y^{n_prev}|.
    double cauchy_gap = 0.0;

    const SolutionPair& limit() const { return entries.back().solution; }
};

/**
 * The regularized driver g_n = conv(g1) + conv(g2): g1 is smoothed in z
 * with constant n + 2 lambda and exponent alpha taken from its declared
 * parameters; g2 (if given) jointly in (y, z) with its (AA) constants.
 * Infimal convolutions give the minimal solution, supremal the maximal.
 */
inline GeneratorSpec regularized_driver(const GeneratorSpec& g1, const GeneratorSpec& g2, double n,
                                        ConvolutionDirection dir, const SearchConfig& search) {
    const auto& p1 = g1.params();
    if (!p1.lambda || !p1.alpha) {
        throw Error(ErrorCode::missing_parameter, g1.id() + ": z-regularization needs lambda and alpha");
    }
    const bool inf = dir == ConvolutionDirection::minimal;
    GeneratorSpec out = inf ? inf_convolve_z(g1, n, *p1.lambda, *p1.alpha, search)
                            : sup_convolve_z(g1, n, *p1.lambda, *p1.alpha, search);
    if (g2) {
        const auto& p2 = g2.params();
        if (!p2.mu_tilde || !p2.lambda_tilde || !p2.alpha_tilde) {
            throw Error(ErrorCode::missing_parameter, g2.id() + ": (y,z)-regularization needs mu~, lambda~, alpha~");
        }
        GeneratorSpec second = inf ? inf_convolve_yz(g2, n, *p2.mu_tilde, *p2.lambda_tilde, *p2.alpha_tilde, search)
                                   : sup_convolve_yz(g2, n, *p2.mu_tilde, *p2.lambda_tilde, *p2.alpha_tilde, search);
        const double cy = second.params().linear_growth.value_or(0.0);
        out = sum_generator(out, second);
        out.params().linear_growth = cy + p1.linear_growth.value_or(0.0);
    }
    return out;
}

/**
 * Solves BSDE(xi, g_n + dV) along the schedule. Y^n must move monotonically
 * (up for the minimal direction); the last two iterates give the Cauchy
 * gap reported as the convergence measure. The contraction check is off:
 * the (y, z)-regularization is Lipschitz in y with constant n + 2 mu~, and
 * steps where that constant times dt reaches stiff_threshold are bracketed.
 */
inline ConvolutionResult solve_minimal_via_convolution(const BrownianLattice& lattice, const std::vector<double>& xi,
                                                       const GeneratorSpec& g1, const GeneratorSpec& g2,
                                                       const ForcingTerm& V, const std::vector<double>& schedule,
                                                       const ConvolutionConfig& cfg = {}) {
    if (schedule.empty()) {
        throw Error(ErrorCode::invalid_argument, "empty convolution schedule");
    }
    for (std::size_t j = 1; j < schedule.size(); ++j) {
        if (!(schedule[j] > schedule[j - 1])) {
            throw Error(ErrorCode::invalid_argument, "schedule must be strictly increasing");
        }
    }
    ConvolutionResult res;
    const double sign = cfg.direction == ConvolutionDirection::minimal ? 1.0 : -1.0;
    for (double n : schedule) {
        const GeneratorSpec gn = regularized_driver(g1, g2, n, cfg.direction, cfg.search);
        NumericsConfig num = cfg.numerics;
        num.enforce_contraction = false;
        if (gn.params().linear_growth.value_or(0.0) * lattice.dt() >= cfg.stiff_threshold) {
            num.force_bracketing = true;
        }
        ConvolutionEntry e{n, solve_bsde(lattice, xi, gn, V, num)};
        if (!res.entries.empty()) {
            const auto& prev = res.entries.back().solution.Y;
            const auto& cur = e.solution.Y;
            for (std::size_t k = 0; k < cur.step_count(); ++k) {
                for (std::size_t i = 0; i < cur.size(k); ++i) {
                    const double wrong = sign * (prev.at(k, i) - cur.at(k, i));
                    if (wrong > cfg.monotone_tol) {
                        ++res.monotonicity_violations;
                        if (wrong > res.worst_monotonicity) {
                            res.worst_monotonicity = wrong;
                            res.worst_node = NodeRef{k, i};
                        }
                    }
                }
            }
            if (res.monotonicity_violations > 0 && cfg.throw_on_violation) {
                throw NodeError(ErrorCode::monotonicity_violation, res.worst_node,
                                "Y^n moved against the regularization order by " +
                                    std::to_string(res.worst_monotonicity) + " at n=" + std::to_string(n));
            }
        }
        res.entries.push_back(std::move(e));
    }
    if (res.entries.size() >= 2) {
        res.cauchy_gap = norms::sup_node_gap(res.entries.back().solution.Y, res.entries[res.entries.size() - 2].solution.Y);
    }
    return res;
}

} // namespace l1bsde
