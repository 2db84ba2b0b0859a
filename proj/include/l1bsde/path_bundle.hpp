#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "l1bsde/error.hpp"
#include "l1bsde/node_process.hpp"
#include "l1bsde/philox.hpp"
#include "l1bsde/time_grid.hpp"

namespace l1bsde {

/**
 * M sampled Brownian paths on a TimeGrid. Increment (path, step, coord) is
 * drawn from Philox4x32-10 with counter (path, step, coord / 2) and key = seed,
 * so the bundle is a pure function of (grid, d, M, seed).
 */
class PathBundle {
public:
    PathBundle(TimeGrid grid, std::size_t dim, std::size_t paths, std::uint64_t seed)
        : grid_(grid), dim_(dim), paths_(paths), seed_(seed) {
        if (dim == 0) {
            throw Error(ErrorCode::invalid_argument, "dimension must be >= 1");
        }
        if (paths == 0) {
            throw Error(ErrorCode::invalid_argument, "path count must be >= 1");
        }
        const std::size_t n = grid_.n_steps();
        const double sd = grid_.sqrt_dt();
        const auto key = Philox4x32::key_from_seed(seed);
        increments_.assign(n, std::vector<double>(paths * dim));
        states_.assign(n + 1, std::vector<double>(paths * dim, 0.0));
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t m = 0; m < paths; ++m) {
                for (std::size_t pair = 0; 2 * pair < dim; ++pair) {
                    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(m),
                                                  static_cast<std::uint32_t>(static_cast<std::uint64_t>(m) >> 32U),
                                                  static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(pair)};
                    const auto [n1, n2] = normal_pair(ctr, key);
                    increments_[k][m * dim + 2 * pair] = sd * n1;
                    if (2 * pair + 1 < dim) {
                        increments_[k][m * dim + 2 * pair + 1] = sd * n2;
                    }
                }
                for (std::size_t c = 0; c < dim; ++c) {
                    states_[k + 1][m * dim + c] = states_[k][m * dim + c] + increments_[k][m * dim + c];
                }
            }
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_steps() const noexcept { return grid_.n_steps(); }
    std::size_t path_count() const noexcept { return paths_; }
    std::uint64_t seed() const noexcept { return seed_; }

    double increment(std::size_t path, std::size_t k, std::size_t c) const {
        return increments_[k][path * dim_ + c];
    }
    std::span<const double> increments(std::size_t k, std::size_t path) const {
        return std::span<const double>(increments_[k]).subspan(path * dim_, dim_);
    }
    /// B at t_k along the path.
    std::span<const double> state(std::size_t k, std::size_t path) const {
        return std::span<const double>(states_[k]).subspan(path * dim_, dim_);
    }

    /// Per-step sizes of a path-indexed NodeProcess.
    std::vector<std::size_t> sizes() const { return std::vector<std::size_t>(n_steps() + 1, paths_); }

    template <class F>
    NodeProcess make_process(F&& f) const {
        NodeProcess p = NodeProcess::shaped(sizes());
        for (std::size_t k = 0; k <= n_steps(); ++k) {
            for (std::size_t m = 0; m < paths_; ++m) {
                p.at(k, m) = f(k, m, state(k, m));
            }
        }
        return p;
    }

    bool operator==(const PathBundle& other) const {
        return grid_ == other.grid_ && dim_ == other.dim_ && paths_ == other.paths_ &&
               increments_ == other.increments_;
    }

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::size_t paths_;
    std::uint64_t seed_;
    std::vector<std::vector<double>> increments_;
    std::vector<std::vector<double>> states_;
};

inline PathBundle sample_paths(const TimeGrid& grid, std::size_t dim, std::size_t paths, std::uint64_t seed) {
    return PathBundle(grid, dim, paths, seed);
}

} // namespace l1bsde
