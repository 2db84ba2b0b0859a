#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "l1bsde/error.hpp"
#include "l1bsde/generator.hpp"
#include "l1bsde/lattice.hpp"
#include "l1bsde/node_process.hpp"
#include "l1bsde/parallel.hpp"
#include "l1bsde/scalar_solve.hpp"

namespace l1bsde {

/// Finite-variation forcing: dV[k][i] is the increment over (t_k, t_{k+1}]
/// charged at node i of step k. An empty term means V = 0.
class ForcingTerm {
public:
    ForcingTerm() = default;
    explicit ForcingTerm(NodeProcess increments) : dv_(std::move(increments)) {
        if (!dv_.all_finite()) {
            throw Error(ErrorCode::invalid_argument, "forcing increments must be finite");
        }
    }

    static ForcingTerm none() { return ForcingTerm(); }

    /// dV = v(t_k, B) dt on the lattice.
    template <class Rate>
    static ForcingTerm from_rate(const BrownianLattice& lattice, Rate&& v) {
        const double dt = lattice.dt();
        return ForcingTerm(lattice.make_process([&](std::size_t k, std::size_t, std::span<const double> b) {
            return k < lattice.n_steps() ? v(lattice.grid().time(k), b) * dt : 0.0;
        }));
    }

    bool empty() const noexcept { return dv_.step_count() == 0; }
    double at(std::size_t k, std::size_t i) const { return empty() ? 0.0 : dv_.at(k, i); }
    double plus(std::size_t k, std::size_t i) const { return std::max(at(k, i), 0.0); }
    double minus(std::size_t k, std::size_t i) const { return std::max(-at(k, i), 0.0); }
    const NodeProcess& increments() const { return dv_; }

    /// E[|V|_T] = E[sum_k (dV+ + dV-)] under the lattice measure.
    double expected_total_variation(const BrownianLattice& lattice) const {
        if (empty()) {
            return 0.0;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
            const auto w = lattice.node_weights(k);
            for (std::size_t i = 0; i < w.size(); ++i) {
                s += w[i] * (plus(k, i) + minus(k, i));
            }
        }
        return s;
    }

private:
    NodeProcess dv_;
};

struct NumericsConfig {
    double tol = 1e-12;
    std::size_t max_iter = 200;
    double damping = 1.0;
    /// Refuse when the declared linear-growth constant gives A dt >= 1.
    bool enforce_contraction = true;
    bool force_bracketing = false;
    std::size_t threads = 1;
    /// Exponent for S^beta / M^beta reporting.
    double beta = 0.5;
    /// Added to the fixed-point starting value (uniqueness probes).
    double start_offset = 0.0;

    RootConfig root() const { return RootConfig{tol, max_iter, damping, force_bracketing}; }
};

struct Diagnostics {
    /// Largest per-node iteration count and residual at each step.
    std::vector<std::size_t> iterations;
    std::vector<double> residuals;
    std::size_t bracketed_nodes = 0;
    double max_residual = 0.0;
    /// E[sum |g(t, Y, Z)| dt], the integrability diagnostic for the drift.
    double drift_h1 = 0.0;
};

/**
 * Discrete solution on a model. dK and dA are per-node increments charged
 * over (t_k, t_{k+1}]; cumulative K and A are path functionals on a
 * recombining lattice and are built by the norm estimators. drift holds the
 * generator value the scheme actually used at each node.
 */
struct SolutionQuadruple {
    NodeProcess Y;
    VectorProcess Z;
    NodeProcess dK;
    NodeProcess dA;
    NodeProcess drift;
    Diagnostics diagnostics;

    double y0() const { return Y.at(0, 0); }
};

using SolutionPair = SolutionQuadruple;

namespace detail {

inline void check_contraction(const GeneratorSpec& g, const TimeGrid& grid, const NumericsConfig& cfg) {
    if (!cfg.enforce_contraction || !g.params().linear_growth) {
        return;
    }
    const double a = *g.params().linear_growth;
    const double a_dt = a * grid.dt();
    if (a_dt >= 1.0) {
        const auto need = static_cast<std::size_t>(std::floor(a * grid.horizon())) + 1;
        throw NonContractionError(a_dt, need);
    }
}

/// One implicit step y = E + g(t, y, z) dt + dV at a node.
inline RootResult implicit_step(const GeneratorSpec& g, const EvalPoint& p, std::span<const double> z, double expect,
                                double dv, double dt, const RootConfig& rc, double start_offset = 0.0) {
    const YSlice s = g.slice(p, z);
    auto rhs = [&](double y) { return expect + s(y) * dt + dv; };
    return solve_fixed_point(rhs, expect + dv + start_offset, rc);
}

inline void check_terminal(const std::vector<double>& xi, const Barrier& lower, const Barrier& upper, std::size_t n) {
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (!std::isfinite(xi[i])) {
            throw NodeError(ErrorCode::invalid_argument, NodeRef{n, i}, "terminal value is not finite");
        }
        if (xi[i] < lower.at(n, i) || xi[i] > upper.at(n, i)) {
            throw NodeError(ErrorCode::terminal_inconsistency, NodeRef{n, i},
                            "terminal value " + std::to_string(xi[i]) + " outside [L_T, U_T]");
        }
    }
}

inline void check_barrier_shape(const Barrier& b, const BrownianLattice& lattice) {
    if (!b.present()) {
        return;
    }
    const auto& v = b.values();
    if (v.step_count() != lattice.n_steps() + 1) {
        throw Error(ErrorCode::invalid_argument, "barrier does not match the lattice");
    }
    for (std::size_t k = 0; k <= lattice.n_steps(); ++k) {
        if (v.size(k) != lattice.node_count(k)) {
            throw Error(ErrorCode::invalid_argument, "barrier does not match the lattice");
        }
    }
}

/**
 * Backward sweep shared by every lattice solver: unconstrained implicit
 * value, then projection onto [L, U]. Below L the scheme charges dK =
 * L - yhat; above U it charges dA = yhat - U; so at most one of them is
 * nonzero at any node.
 */
inline SolutionQuadruple backward_lattice(const BrownianLattice& lattice, const std::vector<double>& xi,
                                          const GeneratorSpec& g, const ForcingTerm& V, const Barrier& lower,
                                          const Barrier& upper, const NumericsConfig& cfg) {
    const std::size_t n = lattice.n_steps();
    const std::size_t d = lattice.dim();
    if (xi.size() != lattice.node_count(n)) {
        throw Error(ErrorCode::invalid_argument, "terminal condition must cover every terminal node");
    }
    check_barrier_shape(lower, lattice);
    check_barrier_shape(upper, lattice);
    if (lower.present() && upper.present()) {
        for (std::size_t k = 0; k <= n; ++k) {
            for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
                if (lower.at(k, i) > upper.at(k, i)) {
                    throw NodeError(ErrorCode::crossed_barriers, NodeRef{k, i}, "L > U");
                }
            }
        }
    }
    if (!V.empty()) {
        const auto& dv = V.increments();
        bool ok = dv.step_count() == n + 1;
        for (std::size_t k = 0; ok && k <= n; ++k) {
            ok = dv.size(k) == lattice.node_count(k);
        }
        if (!ok) {
            throw Error(ErrorCode::invalid_argument, "forcing term does not match the lattice");
        }
    }
    check_terminal(xi, lower, upper, n);
    check_contraction(g, lattice.grid(), cfg);

    const auto sizes = lattice.sizes();
    SolutionQuadruple q;
    q.Y = NodeProcess::shaped(sizes);
    q.Z = VectorProcess(d, sizes);
    q.dK = NodeProcess::shaped(sizes);
    q.dA = NodeProcess::shaped(sizes);
    q.drift = NodeProcess::shaped(sizes);
    q.diagnostics.iterations.assign(n + 1, 0);
    q.diagnostics.residuals.assign(n + 1, 0.0);
    std::copy(xi.begin(), xi.end(), q.Y.step(n).begin());

    const double dt = lattice.dt();
    const RootConfig rc = cfg.root();
    for (std::size_t kk = n; kk-- > 0;) {
        const std::size_t k = kk;
        const auto next = q.Y.step(k + 1);
        const auto expect = conditional_expectation(lattice, next, k);
        const auto zc = martingale_coefficient(lattice, next, k);
        std::copy(zc.begin(), zc.end(), q.Z.step(k).begin());
        const double t = lattice.grid().time(k);
        const std::size_t m = lattice.node_count(k);
        std::vector<std::size_t> iters(m, 0);
        std::vector<double> resid(m, 0.0);
        std::vector<char> bracketed(m, 0);
        parallel_for(m, cfg.threads, [&](std::size_t i) {
            std::array<double, BrownianLattice::max_dim> st{};
            lattice.state(k, i, std::span<double>(st.data(), d));
            const EvalPoint p{t, k, i, std::span<const double>(st.data(), d)};
            const auto z = std::span<const double>(zc).subspan(i * d, d);
            const RootResult rr = implicit_step(g, p, z, expect[i], V.at(k, i), dt, rc, cfg.start_offset);
            if (!rr.converged) {
                throw NonConvergenceError(NodeRef{k, i}, rr.residual);
            }
            const double yhat = rr.y;
            // Drift at the unconstrained value: Y_k - E - g dt - dV = dK - dA exactly.
            q.drift.at(k, i) = (yhat - expect[i] - V.at(k, i)) / dt;
            const double l = lower.at(k, i);
            const double u = upper.at(k, i);
            double y = yhat;
            if (yhat < l) {
                y = l;
                q.dK.at(k, i) = l - yhat;
            } else if (yhat > u) {
                y = u;
                q.dA.at(k, i) = yhat - u;
            }
            q.Y.at(k, i) = y;
            iters[i] = rr.iterations;
            resid[i] = rr.residual;
            bracketed[i] = rr.bracketed ? 1 : 0;
        });
        for (std::size_t i = 0; i < m; ++i) {
            q.diagnostics.iterations[k] = std::max(q.diagnostics.iterations[k], iters[i]);
            q.diagnostics.residuals[k] = std::max(q.diagnostics.residuals[k], resid[i]);
            q.diagnostics.bracketed_nodes += static_cast<std::size_t>(bracketed[i]);
        }
        q.diagnostics.max_residual = std::max(q.diagnostics.max_residual, q.diagnostics.residuals[k]);
    }
    double h1 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto w = lattice.node_weights(k);
        for (std::size_t i = 0; i < w.size(); ++i) {
            h1 += w[i] * std::fabs(q.drift.at(k, i)) * dt;
        }
    }
    q.diagnostics.drift_h1 = h1;
    return q;
}

} // namespace detail

/// xi sampled at the terminal nodes.
template <class F>
std::vector<double> terminal_values(const BrownianLattice& lattice, F&& f) {
    const std::size_t n = lattice.n_steps();
    const std::size_t d = lattice.dim();
    std::vector<double> out(lattice.node_count(n));
    std::array<double, BrownianLattice::max_dim> st{};
    for (std::size_t i = 0; i < out.size(); ++i) {
        lattice.state(n, i, std::span<double>(st.data(), d));
        out[i] = f(std::span<const double>(st.data(), d));
    }
    return out;
}

/// Implicit backward Euler for Y_k = E[Y_{k+1}] + g(t_k, Y_k, Z_k) dt + dV_k.
inline SolutionPair solve_bsde(const BrownianLattice& lattice, const std::vector<double>& xi, const GeneratorSpec& g,
                               const ForcingTerm& V = {}, const NumericsConfig& cfg = {}) {
    return detail::backward_lattice(lattice, xi, g, V, Barrier::absent(BarrierSide::lower),
                                    Barrier::absent(BarrierSide::upper), cfg);
}

} // namespace l1bsde
