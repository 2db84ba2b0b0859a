#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "l1bsde/error.hpp"
#include "l1bsde/node_process.hpp"
#include "l1bsde/time_grid.hpp"

namespace l1bsde {

/**
 * Recombining binomial model of d-dimensional Brownian motion (d = 1 or 2).
 *
 * Step k holds (k+1)^d nodes. A node is identified by its per-coordinate
 * up-move counts j_c in [0, k]; the state is B_c = (2 j_c - k) sqrt(dt).
 * Every node has 2^d children, each reached with probability 2^-d; branch b
 * moves coordinate c up when bit c of b is set.
 */
class BrownianLattice {
public:
    static constexpr std::size_t max_dim = 2;

    BrownianLattice(TimeGrid grid, std::size_t dim) : grid_(grid), dim_(dim) {
        if (dim == 0) {
            throw Error(ErrorCode::invalid_argument, "lattice dimension must be >= 1");
        }
        if (dim > max_dim) {
            throw Error(ErrorCode::dimension_too_large,
                        "lattice supports d <= 2 (got " + std::to_string(dim) +
                            "); use the Monte Carlo backend for higher dimensions");
        }
        sqrt_dt_ = grid_.sqrt_dt();
        branch_count_ = std::size_t{1} << dim_;
        branch_probability_ = 1.0 / static_cast<double>(branch_count_);
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_steps() const noexcept { return grid_.n_steps(); }
    double dt() const noexcept { return grid_.dt(); }
    double sqrt_dt() const noexcept { return sqrt_dt_; }
    std::size_t branch_count() const noexcept { return branch_count_; }
    double branch_probability() const noexcept { return branch_probability_; }

    std::size_t node_count(std::size_t k) const noexcept {
        std::size_t n = 1;
        for (std::size_t c = 0; c < dim_; ++c) {
            n *= (k + 1);
        }
        return n;
    }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out(n_steps() + 1);
        for (std::size_t k = 0; k <= n_steps(); ++k) {
            out[k] = node_count(k);
        }
        return out;
    }

    /// Up-move count of coordinate c at node i of step k.
    std::size_t up_moves(std::size_t k, std::size_t i, std::size_t c) const noexcept {
        if (dim_ == 1) {
            return i;
        }
        return c == 0 ? i / (k + 1) : i % (k + 1);
    }

    double state(std::size_t k, std::size_t i, std::size_t c) const noexcept {
        const auto j = static_cast<double>(up_moves(k, i, c));
        return (2.0 * j - static_cast<double>(k)) * sqrt_dt_;
    }

    void state(std::size_t k, std::size_t i, std::span<double> out) const noexcept {
        for (std::size_t c = 0; c < dim_; ++c) {
            out[c] = state(k, i, c);
        }
    }

    std::size_t child(std::size_t k, std::size_t i, std::size_t b) const noexcept {
        if (dim_ == 1) {
            return i + (b & 1U);
        }
        const std::size_t j1 = i / (k + 1) + (b & 1U);
        const std::size_t j2 = i % (k + 1) + ((b >> 1U) & 1U);
        return j1 * (k + 2) + j2;
    }

    /// Brownian increment of coordinate c along branch b.
    double increment(std::size_t b, std::size_t c) const noexcept {
        return ((b >> c) & 1U) ? sqrt_dt_ : -sqrt_dt_;
    }

    /// Unconditional probability of each node at step k.
    std::vector<double> node_weights(std::size_t k) const {
        std::vector<double> row{1.0};
        for (std::size_t s = 0; s < k; ++s) {
            std::vector<double> next(row.size() + 1, 0.0);
            for (std::size_t j = 0; j < row.size(); ++j) {
                next[j] += 0.5 * row[j];
                next[j + 1] += 0.5 * row[j];
            }
            row = std::move(next);
        }
        if (dim_ == 1) {
            return row;
        }
        std::vector<double> out(node_count(k));
        for (std::size_t a = 0; a <= k; ++a) {
            for (std::size_t b = 0; b <= k; ++b) {
                out[a * (k + 1) + b] = row[a] * row[b];
            }
        }
        return out;
    }

    /// Builds a process from f(k, i, state).
    template <class F>
    NodeProcess make_process(F&& f) const {
        NodeProcess p = NodeProcess::shaped(sizes());
        std::array<double, max_dim> buf{};
        for (std::size_t k = 0; k <= n_steps(); ++k) {
            for (std::size_t i = 0; i < node_count(k); ++i) {
                state(k, i, std::span<double>(buf.data(), dim_));
                p.at(k, i) = f(k, i, std::span<const double>(buf.data(), dim_));
            }
        }
        return p;
    }

    NodeProcess zeros() const { return NodeProcess::shaped(sizes(), 0.0); }

private:
    TimeGrid grid_;
    std::size_t dim_;
    double sqrt_dt_ = 0.0;
    std::size_t branch_count_ = 2;
    double branch_probability_ = 0.5;
};

inline BrownianLattice build_lattice(const TimeGrid& grid, std::size_t dim) {
    return BrownianLattice(grid, dim);
}

namespace detail {

inline void check_step_input(const BrownianLattice& lattice, std::span<const double> next, std::size_t k) {
    if (k >= lattice.n_steps()) {
        throw Error(ErrorCode::step_out_of_range,
                    "step " + std::to_string(k) + " has no successor on a " +
                        std::to_string(lattice.n_steps()) + "-step lattice");
    }
    if (next.size() != lattice.node_count(k + 1)) {
        throw Error(ErrorCode::invalid_argument, "next_values must cover every node of step k+1");
    }
    for (std::size_t i = 0; i < next.size(); ++i) {
        if (!std::isfinite(next[i])) {
            throw NodeError(ErrorCode::sentinel_encountered, NodeRef{k + 1, i}, "non-finite value");
        }
    }
}

} // namespace detail

/// E[next | node] for every node of step k.
inline std::vector<double> conditional_expectation(const BrownianLattice& lattice,
                                                   std::span<const double> next, std::size_t k) {
    detail::check_step_input(lattice, next, k);
    const std::size_t nb = lattice.branch_count();
    const double p = lattice.branch_probability();
    std::vector<double> out(lattice.node_count(k));
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            acc += next[lattice.child(k, i, b)];
        }
        out[i] = p * acc;
    }
    return out;
}

/// Z_k = E[next * dB | node] / dt, flattened node-major (node i owns
/// entries [i*d, (i+1)*d)). For d = 1 this is (up - down) / (2 sqrt(dt)).
inline std::vector<double> martingale_coefficient(const BrownianLattice& lattice,
                                                  std::span<const double> next, std::size_t k) {
    detail::check_step_input(lattice, next, k);
    const std::size_t d = lattice.dim();
    const std::size_t nb = lattice.branch_count();
    const double scale = lattice.branch_probability() / lattice.dt();
    std::vector<double> out(lattice.node_count(k) * d, 0.0);
    for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                acc += next[lattice.child(k, i, b)] * lattice.increment(b, c);
            }
            out[i * d + c] = scale * acc;
        }
    }
    return out;
}

} // namespace l1bsde
