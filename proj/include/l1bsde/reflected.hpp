#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "l1bsde/bsde.hpp"
#include "l1bsde/regularize.hpp"

namespace l1bsde {

struct BarrierPair {
    Barrier lower = Barrier::absent(BarrierSide::lower);
    Barrier upper = Barrier::absent(BarrierSide::upper);
};

/// Lower reflection: Y = max(yhat, L), dK = (L - yhat)^+.
inline SolutionQuadruple solve_rbsde_lower(const BrownianLattice& lattice, const std::vector<double>& xi,
                                           const GeneratorSpec& g, const ForcingTerm& V, const Barrier& lower,
                                           const NumericsConfig& cfg = {}) {
    return detail::backward_lattice(lattice, xi, g, V, lower, Barrier::absent(BarrierSide::upper), cfg);
}

/// Upper reflection: Y = min(yhat, U), dA = (yhat - U)^+.
inline SolutionQuadruple solve_rbsde_upper(const BrownianLattice& lattice, const std::vector<double>& xi,
                                           const GeneratorSpec& g, const ForcingTerm& V, const Barrier& upper,
                                           const NumericsConfig& cfg = {}) {
    return detail::backward_lattice(lattice, xi, g, V, Barrier::absent(BarrierSide::lower), upper, cfg);
}

/// Two barriers; the projection charges exactly one of dK, dA per node.
inline SolutionQuadruple solve_drbsde(const BrownianLattice& lattice, const std::vector<double>& xi,
                                      const GeneratorSpec& g, const ForcingTerm& V, const BarrierPair& barriers,
                                      const NumericsConfig& cfg = {}) {
    return detail::backward_lattice(lattice, xi, g, V, barriers.lower, barriers.upper, cfg);
}

namespace detail {

/// Children average written out per dimension, independently of the solver kernel.
inline double oracle_average(const BrownianLattice& lattice, const std::vector<double>& next, std::size_t k,
                             std::size_t i) {
    if (lattice.dim() == 1) {
        return 0.5 * (next[i] + next[i + 1]);
    }
    const std::size_t w = k + 1;
    const std::size_t a = i / w;
    const std::size_t b = i % w;
    const std::size_t nw = k + 2;
    const double s = next[a * nw + b] + next[(a + 1) * nw + b] + next[a * nw + b + 1] + next[(a + 1) * nw + b + 1];
    return 0.25 * s;
}

} // namespace detail

/// Snell envelope: Y_N = xi, Y_k = max(L_k, E[Y_{k+1}]).
inline NodeProcess snell_oracle(const BrownianLattice& lattice, const std::vector<double>& xi, const Barrier& lower) {
    const std::size_t n = lattice.n_steps();
    NodeProcess y = lattice.zeros();
    std::vector<double> next(xi);
    std::copy(next.begin(), next.end(), y.step(n).begin());
    for (std::size_t k = n; k-- > 0;) {
        std::vector<double> cur(lattice.node_count(k));
        for (std::size_t i = 0; i < cur.size(); ++i) {
            cur[i] = std::max(lower.at(k, i), detail::oracle_average(lattice, next, k, i));
        }
        std::copy(cur.begin(), cur.end(), y.step(k).begin());
        next = std::move(cur);
    }
    return y;
}

/// Dynkin game value: Y_N = xi, Y_k = min(U_k, max(L_k, E[Y_{k+1}])).
inline NodeProcess dynkin_oracle(const BrownianLattice& lattice, const std::vector<double>& xi,
                                 const BarrierPair& barriers) {
    const std::size_t n = lattice.n_steps();
    NodeProcess y = lattice.zeros();
    std::vector<double> next(xi);
    std::copy(next.begin(), next.end(), y.step(n).begin());
    for (std::size_t k = n; k-- > 0;) {
        std::vector<double> cur(lattice.node_count(k));
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const double e = detail::oracle_average(lattice, next, k, i);
            cur[i] = std::min(barriers.upper.at(k, i), std::max(barriers.lower.at(k, i), e));
        }
        std::copy(cur.begin(), cur.end(), y.step(k).begin());
        next = std::move(cur);
    }
    return y;
}

struct FlatOffReport {
    /// E[sum |Y - L| dK] and E[sum |U - Y| dA].
    double kl = 0.0;
    double ua = 0.0;
    std::size_t ortho_violations = 0;
    /// Largest nodewise |Y - L| dK and |U - Y| dA.
    double max_kl_product = 0.0;
    double max_ua_product = 0.0;
};

/**
 * Skorokhod diagnostics. Products are taken in absolute value so that
 * penalized solutions, which sit below L where dK > 0, are not rewarded with
 * negative contributions.
 */
inline FlatOffReport flat_off_report(const BrownianLattice& lattice, const SolutionQuadruple& q,
                                     const BarrierPair& barriers) {
    FlatOffReport r;
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        const auto w = lattice.node_weights(k);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double dk = q.dK.at(k, i);
            const double da = q.dA.at(k, i);
            if (dk > 0.0 && barriers.lower.present()) {
                const double prod = std::fabs(q.Y.at(k, i) - barriers.lower.at(k, i)) * dk;
                r.kl += w[i] * prod;
                r.max_kl_product = std::max(r.max_kl_product, prod);
            }
            if (da > 0.0 && barriers.upper.present()) {
                const double prod = std::fabs(barriers.upper.at(k, i) - q.Y.at(k, i)) * da;
                r.ua += w[i] * prod;
                r.max_ua_product = std::max(r.max_ua_product, prod);
            }
            if (std::min(dk, da) > 0.0) {
                ++r.ortho_violations;
            }
        }
    }
    return r;
}

/// -xi, -V, -barriers (sides swapped) for the negated problem.
inline std::vector<double> negated(const std::vector<double>& v) {
    std::vector<double> out(v);
    for (double& x : out) {
        x = -x;
    }
    return out;
}

inline NodeProcess negated(const NodeProcess& p) {
    NodeProcess out = p;
    for (std::size_t k = 0; k < out.step_count(); ++k) {
        for (double& x : out.step(k)) {
            x = -x;
        }
    }
    return out;
}

inline ForcingTerm negated(const ForcingTerm& v) {
    return v.empty() ? ForcingTerm() : ForcingTerm(negated(v.increments()));
}

inline Barrier negated(const Barrier& b) {
    const BarrierSide flipped = b.side() == BarrierSide::lower ? BarrierSide::upper : BarrierSide::lower;
    if (!b.present()) {
        return Barrier::absent(flipped);
    }
    return flipped == BarrierSide::lower ? Barrier::lower(negated(b.values())) : Barrier::upper(negated(b.values()));
}

} // namespace l1bsde
