#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "l1bsde/lattice.hpp"
#include "l1bsde/node_process.hpp"
#include "l1bsde/philox.hpp"

namespace l1bsde {

/**
 * Finite family of paths with probabilities. On the lattice a path is its
 * node index at every step; enumeration is exhaustive when the lattice has
 * at most 2^16 paths, otherwise paths are drawn with a seeded Philox stream.
 * The identity family (path m sits at node m at every step) serves the
 * Monte Carlo backend, where a "node" is already a path.
 */
class PathSet {
public:
    static PathSet identity(std::size_t paths, std::size_t n_steps) {
        PathSet s;
        s.identity_ = true;
        s.count_ = paths;
        s.n_steps_ = n_steps;
        s.weights_.assign(paths, 1.0 / static_cast<double>(paths));
        return s;
    }

    static PathSet for_lattice(const BrownianLattice& lattice, std::size_t samples = 16384, std::uint64_t seed = 1) {
        PathSet s;
        s.n_steps_ = lattice.n_steps();
        const std::size_t bits = lattice.dim() * lattice.n_steps();
        const std::size_t nb = lattice.branch_count();
        auto walk = [&](auto&& branch_at) {
            std::vector<std::size_t> nodes(s.n_steps_ + 1, 0);
            for (std::size_t k = 0; k < s.n_steps_; ++k) {
                nodes[k + 1] = lattice.child(k, nodes[k], branch_at(k));
            }
            return nodes;
        };
        if (bits <= 16) {
            const std::size_t total = std::size_t{1} << bits;
            s.exact_ = true;
            for (std::size_t code = 0; code < total; ++code) {
                s.nodes_.push_back(walk([&](std::size_t k) { return (code >> (k * lattice.dim())) & (nb - 1); }));
            }
            s.weights_.assign(total, 1.0 / static_cast<double>(total));
        } else {
            for (std::size_t m = 0; m < samples; ++m) {
                s.nodes_.push_back(walk([&](std::size_t k) {
                    const double u = addressed_uniform(seed, m, k);
                    return std::min(nb - 1, static_cast<std::size_t>(u * static_cast<double>(nb)));
                }));
            }
            s.weights_.assign(samples, 1.0 / static_cast<double>(samples));
        }
        s.count_ = s.weights_.size();
        return s;
    }

    std::size_t size() const noexcept { return count_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    bool exact() const noexcept { return exact_; }
    double weight(std::size_t p) const { return weights_[p]; }
    std::size_t node(std::size_t p, std::size_t k) const { return identity_ ? p : nodes_[p][k]; }

private:
    bool identity_ = false;
    bool exact_ = false;
    std::size_t count_ = 0;
    std::size_t n_steps_ = 0;
    std::vector<std::vector<std::size_t>> nodes_;
    std::vector<double> weights_;
};

namespace norms {

/// Per-path sup_k |X_k|.
inline std::vector<double> path_sup(const NodeProcess& x, const PathSet& paths) {
    std::vector<double> out(paths.size(), 0.0);
    for (std::size_t p = 0; p < paths.size(); ++p) {
        double m = 0.0;
        for (std::size_t k = 0; k <= paths.n_steps(); ++k) {
            m = std::max(m, std::fabs(x.at(k, paths.node(p, k))));
        }
        out[p] = m;
    }
    return out;
}

/// Per-path sup_k |sum_{j<k} dX_j|, the running total of per-node increments.
inline std::vector<double> path_sup_cumulative(const NodeProcess& dx, const PathSet& paths) {
    std::vector<double> out(paths.size(), 0.0);
    for (std::size_t p = 0; p < paths.size(); ++p) {
        double acc = 0.0;
        double m = 0.0;
        for (std::size_t k = 0; k < paths.n_steps(); ++k) {
            acc += dx.at(k, paths.node(p, k));
            m = std::max(m, std::fabs(acc));
        }
        out[p] = m;
    }
    return out;
}

/// Per-path sum_k |Z_k|^2 dt.
inline std::vector<double> path_quadratic(const VectorProcess& z, const PathSet& paths, double dt) {
    std::vector<double> out(paths.size(), 0.0);
    for (std::size_t p = 0; p < paths.size(); ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < paths.n_steps(); ++k) {
            const double n = z.norm(k, paths.node(p, k));
            s += n * n * dt;
        }
        out[p] = s;
    }
    return out;
}

/// sum_p w_p v_p^power.
inline double weighted_power_mean(const std::vector<double>& v, const PathSet& paths, double power) {
    double s = 0.0;
    for (std::size_t p = 0; p < v.size(); ++p) {
        s += paths.weight(p) * std::pow(v[p], power);
    }
    return s;
}

/// Bootstrap standard error of the mean of v^power (equal weights assumed).
inline double bootstrap_se(const std::vector<double>& v, double power, std::size_t resamples, std::uint64_t seed) {
    const std::size_t m = v.size();
    if (m < 2 || resamples < 2) {
        return 0.0;
    }
    std::vector<double> transformed(m);
    for (std::size_t i = 0; i < m; ++i) {
        transformed[i] = std::pow(v[i], power);
    }
    std::vector<double> means(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double u = addressed_uniform(seed, b, i);
            s += transformed[std::min(m - 1, static_cast<std::size_t>(u * static_cast<double>(m)))];
        }
        means[b] = s / static_cast<double>(m);
    }
    double mean = 0.0;
    for (double x : means) {
        mean += x;
    }
    mean /= static_cast<double>(resamples);
    double var = 0.0;
    for (double x : means) {
        var += (x - mean) * (x - mean);
    }
    return std::sqrt(var / static_cast<double>(resamples - 1));
}

/**
 * Largest |sum_{j<k} dX_j| over every lattice path and time, by a forward
 * pass carrying the max and min running total that can reach each node.
 */
inline double lattice_sup_cumulative(const BrownianLattice& lattice, const NodeProcess& dx) {
    std::vector<double> hi{0.0};
    std::vector<double> lo{0.0};
    double best = 0.0;
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        const std::size_t next = lattice.node_count(k + 1);
        std::vector<double> nhi(next, -INFINITY);
        std::vector<double> nlo(next, INFINITY);
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            const double a = hi[i] + dx.at(k, i);
            const double b = lo[i] + dx.at(k, i);
            for (std::size_t br = 0; br < lattice.branch_count(); ++br) {
                const std::size_t c = lattice.child(k, i, br);
                nhi[c] = std::max(nhi[c], a);
                nlo[c] = std::min(nlo[c], b);
            }
        }
        for (std::size_t c = 0; c < next; ++c) {
            best = std::max({best, std::fabs(nhi[c]), std::fabs(nlo[c])});
        }
        hi = std::move(nhi);
        lo = std::move(nlo);
    }
    return best;
}

/// Largest nodewise |a - b|.
inline double sup_node_gap(const NodeProcess& a, const NodeProcess& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.step_count(); ++k) {
        for (std::size_t i = 0; i < a.size(k); ++i) {
            m = std::max(m, std::fabs(a.at(k, i) - b.at(k, i)));
        }
    }
    return m;
}

inline NodeProcess difference(const NodeProcess& a, const NodeProcess& b) {
    NodeProcess out = a;
    for (std::size_t k = 0; k < a.step_count(); ++k) {
        for (std::size_t i = 0; i < a.size(k); ++i) {
            out.at(k, i) -= b.at(k, i);
        }
    }
    return out;
}

inline VectorProcess difference(const VectorProcess& a, const VectorProcess& b) {
    VectorProcess out = a;
    for (std::size_t k = 0; k < a.step_count(); ++k) {
        auto row = out.step(k);
        auto other = b.step(k);
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] -= other[j];
        }
    }
    return out;
}

} // namespace norms

struct NormConfig {
    double beta = 0.5;
    std::size_t path_samples = 16384;
    std::uint64_t seed = 1;
    std::size_t bootstrap = 200;
    /// Levels for the class-(D) proxy; empty means 16 log-spaced levels.
    std::vector<double> classd_levels;
};

struct NormReport {
    double beta = 0.5;
    /// E[sup |Y|^beta] (no root, as for exponents below one).
    double s_beta = 0.0;
    /// E[(sum |Z|^2 dt)^(beta/2)].
    double m_beta = 0.0;
    /// E[sum |X| dt] for the drift.
    double h1 = 0.0;
    double s_beta_se = 0.0;
    double m_beta_se = 0.0;
    bool exact = false;
    /// (c, sup over the stopping family of E[|Y_tau| 1{|Y_tau| > c}]).
    std::vector<std::pair<double, double>> classd_curve;
};

/**
 * Class-(D) proxy. The family is the first hitting times of {|Y| >= c'} for
 * every level c' plus the deterministic times 0, N/4, N/2, 3N/4, N; each
 * point of the curve is the largest tail expectation over that family.
 */
inline std::vector<std::pair<double, double>> classd_curve(const NodeProcess& y, const PathSet& paths,
                                                           std::vector<double> levels) {
    const std::size_t n = paths.n_steps();
    if (levels.empty()) {
        double top = 0.0;
        for (std::size_t p = 0; p < paths.size(); ++p) {
            for (std::size_t k = 0; k <= n; ++k) {
                top = std::max(top, std::fabs(y.at(k, paths.node(p, k))));
            }
        }
        top = std::max(top, 1e-12);
        for (int j = 0; j < 16; ++j) {
            levels.push_back(top * std::pow(2.0, -15.0 + j));
        }
    }
    std::sort(levels.begin(), levels.end());
    // Stopped values per family member per path.
    std::vector<std::vector<double>> stopped;
    for (double c : levels) {
        std::vector<double> v(paths.size());
        for (std::size_t p = 0; p < paths.size(); ++p) {
            std::size_t tau = n;
            for (std::size_t k = 0; k <= n; ++k) {
                if (std::fabs(y.at(k, paths.node(p, k))) >= c) {
                    tau = k;
                    break;
                }
            }
            v[p] = std::fabs(y.at(tau, paths.node(p, tau)));
        }
        stopped.push_back(std::move(v));
    }
    for (std::size_t k : {std::size_t{0}, n / 4, n / 2, 3 * n / 4, n}) {
        std::vector<double> v(paths.size());
        for (std::size_t p = 0; p < paths.size(); ++p) {
            v[p] = std::fabs(y.at(k, paths.node(p, k)));
        }
        stopped.push_back(std::move(v));
    }
    std::vector<std::pair<double, double>> out;
    for (double c : levels) {
        double best = 0.0;
        for (const auto& v : stopped) {
            double s = 0.0;
            for (std::size_t p = 0; p < v.size(); ++p) {
                if (v[p] > c) {
                    s += paths.weight(p) * v[p];
                }
            }
            best = std::max(best, s);
        }
        out.emplace_back(c, best);
    }
    return out;
}

/// Norms of (Y, Z) and of the drift X along the given path family.
inline NormReport estimate_norms(const NodeProcess& y, const VectorProcess& z, const NodeProcess& x, double dt,
                                 const PathSet& paths, const NormConfig& cfg = {}) {
    if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1)");
    }
    NormReport r;
    r.beta = cfg.beta;
    r.exact = paths.exact();
    const auto sup = norms::path_sup(y, paths);
    const auto quad = norms::path_quadratic(z, paths, dt);
    r.s_beta = norms::weighted_power_mean(sup, paths, cfg.beta);
    r.m_beta = norms::weighted_power_mean(quad, paths, 0.5 * cfg.beta);
    double h1 = 0.0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < paths.n_steps(); ++k) {
            s += std::fabs(x.at(k, paths.node(p, k))) * dt;
        }
        h1 += paths.weight(p) * s;
    }
    r.h1 = h1;
    if (!paths.exact()) {
        r.s_beta_se = norms::bootstrap_se(sup, cfg.beta, cfg.bootstrap, cfg.seed);
        r.m_beta_se = norms::bootstrap_se(quad, 0.5 * cfg.beta, cfg.bootstrap, cfg.seed + 1);
    }
    r.classd_curve = classd_curve(y, paths, cfg.classd_levels);
    return r;
}

} // namespace l1bsde
