#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "l1bsde/bsde.hpp"
#include "l1bsde/error.hpp"
#include "l1bsde/generator.hpp"
#include "l1bsde/parallel.hpp"
#include "l1bsde/path_bundle.hpp"
#include "l1bsde/philox.hpp"

namespace l1bsde {

struct RegressionConfig {
    /// Total degree of the polynomial basis in B_t / sqrt(t).
    std::size_t degree = 2;
    /// Refuse when sigma_min / sigma_max of the design falls below this.
    double min_inverse_condition = 1e-12;
    std::size_t bootstrap = 200;
    std::uint64_t bootstrap_seed = 11;
    NumericsConfig numerics;
};

/// Path-indexed solution: Y.at(k, m) is Y at t_k along path m.
struct McSolution {
    NodeProcess Y;
    VectorProcess Z;
    double y0 = 0.0;
    double y0_se = 0.0;
    std::vector<double> z0;
    /// sigma_max / sigma_min of the design at each step (1 at step 0).
    std::vector<double> condition;
    double worst_condition = 1.0;
    std::size_t bracketed = 0;
    double max_residual = 0.0;
    /// Heavy-tail diagnostics for xi.
    double xi_abs_mean = 0.0;
    double xi_abs_max = 0.0;
};

namespace detail {

/// Exponent tuples of total degree <= p in d variables, constant first.
inline std::vector<std::vector<int>> monomials(std::size_t d, std::size_t p) {
    std::vector<std::vector<int>> out;
    std::vector<int> e(d, 0);
    for (std::size_t total = 0; total <= p; ++total) {
        // All compositions of `total` into d parts, in lexicographic order.
        std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
            if (pos + 1 == d) {
                e[pos] = left;
                out.push_back(e);
                return;
            }
            for (int v = left; v >= 0; --v) {
                e[pos] = v;
                rec(pos + 1, left - v);
            }
        };
        rec(0, static_cast<int>(total));
    }
    return out;
}

/// Mean shifted by the first value, so a constant sample averages to itself exactly.
inline double shifted_mean(std::span<const double> v) {
    const double c = v[0];
    double s = 0.0;
    for (double x : v) {
        s += x - c;
    }
    return c + s / static_cast<double>(v.size());
}

} // namespace detail

/**
 * Least-squares Monte Carlo backward induction with the same implicit step
 * as the lattice solver: E[Y_{k+1} | B_k] and E[Y_{k+1} dB | B_k] / dt are
 * polynomial regressions on B_k / sqrt(t_k). At t_0 every path shares the
 * state, so step 0 uses sample means and its bootstrap gives the standard
 * error of Y_0. dV, if non-empty, is a path-indexed process of increments.
 */
inline McSolution solve_bsde_mc(const PathBundle& bundle, const std::vector<double>& xi, const GeneratorSpec& g,
                                const NodeProcess& dV = {}, const RegressionConfig& cfg = {}) {
    const std::size_t n = bundle.n_steps();
    const std::size_t d = bundle.dim();
    const std::size_t paths = bundle.path_count();
    if (xi.size() != paths) {
        throw Error(ErrorCode::invalid_argument, "terminal values do not match the path count");
    }
    const bool has_v = dV.step_count() > 0;
    if (has_v && dV.step_count() != n + 1) {
        throw Error(ErrorCode::invalid_argument, "forcing increments do not match the bundle");
    }
    detail::check_contraction(g, bundle.grid(), cfg.numerics);
    McSolution out;
    const auto sizes = bundle.sizes();
    out.Y = NodeProcess::shaped(sizes);
    out.Z = VectorProcess(d, sizes);
    out.condition.assign(n, 1.0);
    for (std::size_t m = 0; m < paths; ++m) {
        if (!std::isfinite(xi[m])) {
            throw NodeError(ErrorCode::invalid_argument, NodeRef{n, m}, "terminal value is not finite");
        }
        out.Y.at(n, m) = xi[m];
        out.xi_abs_mean += std::fabs(xi[m]);
        out.xi_abs_max = std::max(out.xi_abs_max, std::fabs(xi[m]));
    }
    out.xi_abs_mean /= static_cast<double>(paths);

    const double dt = bundle.grid().dt();
    const RootConfig rc = cfg.numerics.root();
    const auto basis = detail::monomials(d, cfg.degree);
    const std::size_t p = basis.size();
    if (n > 1 && paths < p) {
        throw NodeError(ErrorCode::singular_regression, NodeRef{n - 1, 0},
                        "regression needs at least " + std::to_string(p) + " paths, got " + std::to_string(paths));
    }
    std::vector<double> expect(paths);
    std::vector<double> zeta(paths * d);
    // xi plus the drift and forcing each path accumulates after step 0. With
    // a constant in the basis every regression preserves the sample mean, so
    // the mean of these equals the mean of Y_1 and their spread carries the
    // Monte Carlo error of Y_0.
    std::vector<double> pathwise(xi);

    for (std::size_t kk = n; kk-- > 0;) {
        const std::size_t k = kk;
        const auto next = out.Y.step(k + 1);
        const double c = next[0];
        if (k == 0) {
            std::vector<double> prod(paths);
            const double e = detail::shifted_mean(next);
            std::fill(expect.begin(), expect.end(), e);
            for (std::size_t j = 0; j < d; ++j) {
                for (std::size_t m = 0; m < paths; ++m) {
                    prod[m] = (next[m] - c) * bundle.increment(m, 0, j);
                }
                const double z = detail::shifted_mean(prod) / dt;
                for (std::size_t m = 0; m < paths; ++m) {
                    zeta[m * d + j] = z;
                }
            }
        } else {
            const double scale = 1.0 / std::sqrt(bundle.grid().time(k));
            Eigen::MatrixXd design(paths, p);
            Eigen::MatrixXd rhs(paths, d + 1);
            for (std::size_t m = 0; m < paths; ++m) {
                const auto b = bundle.state(k, m);
                for (std::size_t col = 0; col < p; ++col) {
                    double v = 1.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        for (int e = 0; e < basis[col][j]; ++e) {
                            v *= b[j] * scale;
                        }
                    }
                    design(m, col) = v;
                }
                // Regressing Y - c lets a constant Y come back exactly.
                const double y = next[m] - c;
                rhs(m, 0) = y;
                for (std::size_t j = 0; j < d; ++j) {
                    rhs(m, j + 1) = y * bundle.increment(m, k, j) / dt;
                }
            }
            const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
            const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
            const auto sv = svd.singularValues();
            const double smax = sv(0);
            const double smin = sv(static_cast<Eigen::Index>(p) - 1);
            if (!(smin > cfg.min_inverse_condition * smax)) {
                throw NodeError(ErrorCode::singular_regression, NodeRef{k, 0},
                                "regression design is singular (sigma_min/sigma_max = " + sci(smin / smax) + ")");
            }
            out.condition[k] = smax / smin;
            const Eigen::MatrixXd coef = qr.solve(rhs);
            const Eigen::MatrixXd fitted = design * coef;
            for (std::size_t m = 0; m < paths; ++m) {
                expect[m] = c + fitted(static_cast<Eigen::Index>(m), 0);
                for (std::size_t j = 0; j < d; ++j) {
                    zeta[m * d + j] = fitted(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j + 1));
                }
            }
        }
        const double t = bundle.grid().time(k);
        std::vector<double> resid(paths, 0.0);
        std::vector<char> bracketed(paths, 0);
        parallel_for(paths, cfg.numerics.threads, [&](std::size_t m) {
            const auto z = std::span<const double>(zeta).subspan(m * d, d);
            std::copy(z.begin(), z.end(), out.Z.at(k, m).begin());
            const EvalPoint pt{t, k, m, bundle.state(k, m)};
            const double dv = has_v ? dV.at(k, m) : 0.0;
            const RootResult rr = detail::implicit_step(g, pt, z, expect[m], dv, dt, rc, cfg.numerics.start_offset);
            if (!rr.converged) {
                throw NonConvergenceError(NodeRef{k, m}, rr.residual);
            }
            out.Y.at(k, m) = rr.y;
            if (k > 0) {
                pathwise[m] += rr.y - expect[m];
            }
            resid[m] = rr.residual;
            bracketed[m] = rr.bracketed ? 1 : 0;
        });
        for (std::size_t m = 0; m < paths; ++m) {
            out.max_residual = std::max(out.max_residual, resid[m]);
            out.bracketed += static_cast<std::size_t>(bracketed[m]);
        }
    }
    out.y0 = out.Y.at(0, 0);
    out.z0.assign(out.Z.at(0, 0).begin(), out.Z.at(0, 0).end());
    out.worst_condition = *std::max_element(out.condition.begin(), out.condition.end());

    // Bootstrap over paths of the step-0 estimator.
    if (cfg.bootstrap > 1) {
        const auto y1 = out.Y.step(1);
        const EvalPoint pt{0.0, 0, 0, bundle.state(0, 0)};
        const double dv = has_v ? dV.at(0, 0) : 0.0;
        const double c = pathwise[0];
        const double cy = y1[0];
        std::vector<double> reps(cfg.bootstrap);
        std::vector<double> zb(d);
        for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
            double s = 0.0;
            std::fill(zb.begin(), zb.end(), 0.0);
            for (std::size_t m = 0; m < paths; ++m) {
                const double u = addressed_uniform(cfg.bootstrap_seed, b, m);
                const auto idx = std::min(paths - 1, static_cast<std::size_t>(u * static_cast<double>(paths)));
                s += pathwise[idx] - c;
                for (std::size_t j = 0; j < d; ++j) {
                    zb[j] += (y1[idx] - cy) * bundle.increment(idx, 0, j);
                }
            }
            const double e = c + s / static_cast<double>(paths);
            for (double& z : zb) {
                z /= static_cast<double>(paths) * dt;
            }
            reps[b] = detail::implicit_step(g, pt, zb, e, dv, dt, rc).y;
        }
        double mean = 0.0;
        for (double r : reps) {
            mean += r;
        }
        mean /= static_cast<double>(reps.size());
        double var = 0.0;
        for (double r : reps) {
            var += (r - mean) * (r - mean);
        }
        out.y0_se = std::sqrt(var / static_cast<double>(reps.size() - 1));
    }
    return out;
}

/// xi along every path of the bundle from B_T.
template <class F>
std::vector<double> terminal_values(const PathBundle& bundle, F&& f) {
    std::vector<double> xi(bundle.path_count());
    for (std::size_t m = 0; m < xi.size(); ++m) {
        xi[m] = f(bundle.state(bundle.n_steps(), m));
    }
    return xi;
}

} // namespace l1bsde
