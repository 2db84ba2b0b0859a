#pragma once

#include <cmath>
#include <cstddef>

#include "l1bsde/error.hpp"

namespace l1bsde {

/// Uniform partition of [0, T] into n_steps intervals.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
        if (n_steps == 0) {
            throw Error(ErrorCode::zero_steps, "time grid needs at least one step");
        }
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw Error(ErrorCode::invalid_argument, "horizon must be positive and finite");
        }
        dt_ = horizon / static_cast<double>(n_steps);
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    double dt() const noexcept { return dt_; }
    double sqrt_dt() const noexcept { return std::sqrt(dt_); }

    /// t_k; t_N is exactly T.
    double time(std::size_t k) const noexcept {
        if (k == n_steps_) {
            return horizon_;
        }
        return horizon_ * static_cast<double>(k) / static_cast<double>(n_steps_);
    }

    bool operator==(const TimeGrid& other) const noexcept {
        return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
    }

private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
};

} // namespace l1bsde
