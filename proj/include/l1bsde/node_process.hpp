#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "l1bsde/error.hpp"

namespace l1bsde {

/// Adapted scalar process sampled on a discrete model: one value per node per
/// step. On the lattice a "node" is a lattice state; on a path bundle it is a
/// path index. Layout per step is owned by the model that created it.
class NodeProcess {
public:
    NodeProcess() = default;

    explicit NodeProcess(std::vector<std::vector<double>> values) : values_(std::move(values)) {}

    /// Process with the given per-step sizes, filled with `fill`.
    static NodeProcess shaped(std::span<const std::size_t> sizes, double fill = 0.0) {
        std::vector<std::vector<double>> values;
        values.reserve(sizes.size());
        for (std::size_t n : sizes) {
            values.emplace_back(n, fill);
        }
        return NodeProcess(std::move(values));
    }

    std::size_t n_steps() const noexcept { return values_.empty() ? 0 : values_.size() - 1; }
    std::size_t step_count() const noexcept { return values_.size(); }
    std::size_t size(std::size_t k) const { return values_.at(k).size(); }

    double at(std::size_t k, std::size_t i) const { return values_[k][i]; }
    double& at(std::size_t k, std::size_t i) { return values_[k][i]; }

    std::span<const double> step(std::size_t k) const { return values_.at(k); }
    std::span<double> step(std::size_t k) { return values_.at(k); }

    const std::vector<std::vector<double>>& raw() const noexcept { return values_; }

    bool all_finite() const {
        for (const auto& row : values_) {
            for (double v : row) {
                if (!std::isfinite(v)) {
                    return false;
                }
            }
        }
        return true;
    }

    bool operator==(const NodeProcess&) const = default;

private:
    std::vector<std::vector<double>> values_;
};

/// R^d-valued adapted process (e.g. Z); node i at step k stores coordinates
/// [i*dim, (i+1)*dim).
class VectorProcess {
public:
    VectorProcess() = default;

    VectorProcess(std::size_t dim, std::span<const std::size_t> sizes) : dim_(dim) {
        values_.reserve(sizes.size());
        for (std::size_t n : sizes) {
            values_.emplace_back(n * dim, 0.0);
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t step_count() const noexcept { return values_.size(); }
    std::size_t size(std::size_t k) const { return values_.at(k).size() / dim_; }

    std::span<const double> at(std::size_t k, std::size_t i) const {
        return std::span<const double>(values_[k]).subspan(i * dim_, dim_);
    }
    std::span<double> at(std::size_t k, std::size_t i) {
        return std::span<double>(values_[k]).subspan(i * dim_, dim_);
    }

    std::span<const double> step(std::size_t k) const { return values_.at(k); }
    std::span<double> step(std::size_t k) { return values_.at(k); }

    double norm(std::size_t k, std::size_t i) const {
        double s = 0.0;
        for (double v : at(k, i)) {
            s += v * v;
        }
        return std::sqrt(s);
    }

    bool operator==(const VectorProcess&) const = default;

private:
    std::size_t dim_ = 1;
    std::vector<std::vector<double>> values_;
};

enum class BarrierSide { lower, upper };

/// Barrier process or the explicit "absent" marker (L = -inf / U = +inf).
/// An absent barrier holds no values at all; lookups return the matching
/// infinity so comparisons behave, but nothing ever stores an infinity.
class Barrier {
public:
    static Barrier absent(BarrierSide side) { return Barrier(side, std::nullopt); }
    static Barrier lower(NodeProcess values) { return Barrier(BarrierSide::lower, std::move(values)); }
    static Barrier upper(NodeProcess values) { return Barrier(BarrierSide::upper, std::move(values)); }

    BarrierSide side() const noexcept { return side_; }
    bool present() const noexcept { return values_.has_value(); }
    const NodeProcess& values() const { return values_.value(); }
    NodeProcess& values() { return values_.value(); }

    double at(std::size_t k, std::size_t i) const {
        if (!values_) {
            return side_ == BarrierSide::lower ? -std::numeric_limits<double>::infinity()
                                               : std::numeric_limits<double>::infinity();
        }
        return values_->at(k, i);
    }

private:
    Barrier(BarrierSide side, std::optional<NodeProcess> values) : side_(side), values_(std::move(values)) {
        if (values_ && !values_->all_finite()) {
            throw Error(ErrorCode::invalid_argument,
                        "barrier values must be finite; use Barrier::absent for +-infinity");
        }
    }

    BarrierSide side_;
    std::optional<NodeProcess> values_;
};

} // namespace l1bsde
