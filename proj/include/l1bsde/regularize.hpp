#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l1bsde/error.hpp"
#include "l1bsde/generator.hpp"
#include "l1bsde/node_process.hpp"

namespace l1bsde {

namespace detail {

inline double neg_part(double x) { return x < 0.0 ? -x : 0.0; }
inline double pos_part(double x) { return x > 0.0 ? x : 0.0; }

inline double barrier_at(const Barrier& b, const EvalPoint& p) {
    return b.present() ? b.values().at(p.step, p.node) : b.at(0, 0);
}

} // namespace detail

/// g + n (y - L)^-. An absent barrier returns g unchanged.
inline GeneratorSpec penalize_lower(const GeneratorSpec& g, const Barrier& lower, double n) {
    if (n < 0.0) {
        throw Error(ErrorCode::invalid_argument, "penalty level must be >= 0");
    }
    if (!lower.present() || n == 0.0) {
        return g;
    }
    GeneratorSpec out(g.id() + "+pen_L",
                      [g, lower, n](const EvalPoint& p, double y, std::span<const double> z) {
                          return g(p, y, z) + n * detail::neg_part(y - detail::barrier_at(lower, p));
                      });
    out.set_slicer([g, lower, n](const EvalPoint& p, std::span<const double> z) -> YSlice {
        return [s = g.slice(p, z), l = detail::barrier_at(lower, p), n](double y) {
            return s(y) + n * detail::neg_part(y - l);
        };
    });
    // The penalty is nonincreasing in y, so the one-sided modulus of g carries over.
    out.params().rho = g.params().rho;
    out.params().linear_growth = g.params().linear_growth;
    return out;
}

/// g - n (y - U)^+. An absent barrier returns g unchanged.
inline GeneratorSpec penalize_upper(const GeneratorSpec& g, const Barrier& upper, double n) {
    if (n < 0.0) {
        throw Error(ErrorCode::invalid_argument, "penalty level must be >= 0");
    }
    if (!upper.present() || n == 0.0) {
        return g;
    }
    GeneratorSpec out(g.id() + "+pen_U",
                      [g, upper, n](const EvalPoint& p, double y, std::span<const double> z) {
                          return g(p, y, z) - n * detail::pos_part(y - detail::barrier_at(upper, p));
                      });
    out.set_slicer([g, upper, n](const EvalPoint& p, std::span<const double> z) -> YSlice {
        return [s = g.slice(p, z), u = detail::barrier_at(upper, p), n](double y) {
            return s(y) - n * detail::pos_part(y - u);
        };
    });
    out.params().rho = g.params().rho;
    out.params().linear_growth = g.params().linear_growth;
    return out;
}

/// Throws crossed_barriers at the first node with L > U.
inline void check_barrier_order(const Barrier& lower, const Barrier& upper) {
    if (!lower.present() || !upper.present()) {
        return;
    }
    const auto& l = lower.values();
    const auto& u = upper.values();
    if (l.step_count() != u.step_count()) {
        throw Error(ErrorCode::invalid_argument, "barriers live on different models");
    }
    for (std::size_t k = 0; k < l.step_count(); ++k) {
        for (std::size_t i = 0; i < l.size(k); ++i) {
            if (l.at(k, i) > u.at(k, i)) {
                throw NodeError(ErrorCode::crossed_barriers, NodeRef{k, i},
                                "L = " + std::to_string(l.at(k, i)) + " > U = " + std::to_string(u.at(k, i)));
            }
        }
    }
}

/// g + n (y - L)^- - n (y - U)^+.
inline GeneratorSpec penalize_double(const GeneratorSpec& g, const Barrier& lower, const Barrier& upper, double n) {
    check_barrier_order(lower, upper);
    return penalize_upper(penalize_lower(g, lower, n), upper, n);
}

/**
 * Search design for the convolution regularizers.
 *
 * Each axis of the search box is a uniform grid centred on the evaluation
 * point (odd point count, so the centre itself is a candidate), followed by
 * one golden-section pass per axis around the best grid point. The half
 * width starts at initial_radius and doubles until, along every axis, the
 * bracket at the box edge exceeds the unpenalized value at the centre.
 */
struct SearchConfig {
    std::size_t points = 513;
    /// Per-axis points when the search has two or more axes.
    std::size_t points_multi = 65;
    double initial_radius = 0.25;
    double max_radius = 1024.0;
    bool golden = true;
    std::size_t golden_iterations = 48;
};

namespace detail {

/// Penalty block: coordinates [begin, begin+len) measured against centre
/// with cost c |w - x|^alpha (Euclidean norm over the block).
struct PenaltyBlock {
    std::size_t begin = 0;
    std::size_t len = 1;
    double c = 1.0;
    double alpha = 1.0;
};

inline double block_penalty(const std::vector<PenaltyBlock>& blocks, std::span<const double> w,
                            std::span<const double> x) {
    double s = 0.0;
    for (const auto& b : blocks) {
        double n2 = 0.0;
        for (std::size_t i = b.begin; i < b.begin + b.len; ++i) {
            n2 += (w[i] - x[i]) * (w[i] - x[i]);
        }
        if (n2 > 0.0) {
            s += b.c * (b.alpha == 1.0 ? std::sqrt(n2) : std::pow(n2, 0.5 * b.alpha));
        }
    }
    return s;
}

template <class F>
double golden_min(F&& f, double a, double b, std::size_t iterations, double& arg) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (std::size_t it = 0; it < iterations && (b - a) > 1e-15 * (1.0 + std::fabs(a)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if (fc < fd) {
        arg = c;
        return fc;
    }
    arg = d;
    return fd;
}

inline void check_exponent(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "Hoelder exponent must lie in (0, 1]");
    }
}

inline GeneratorParams holder_params(const GeneratorParams& from, double c, double alpha) {
    GeneratorParams p;
    p.rho = from.rho;
    p.linear_growth = from.linear_growth;
    p.phi = [c, alpha](double x) { return c * std::pow(x, alpha); };
    p.gamma = c;
    p.alpha = alpha;
    p.f = [](const EvalPoint&) { return 0.0; };
    return p;
}

/// Per-axis radius: doubles from cfg.initial_radius until moving that axis
/// alone to either edge costs more than staying at the centre.
template <class Base>
std::vector<double> search_radii(Base&& base, std::span<const double> x, const std::vector<PenaltyBlock>& blocks,
                                 const SearchConfig& cfg) {
    const std::size_t m = x.size();
    std::vector<double> w(x.begin(), x.end());
    const double at_centre = base(std::span<const double>(w));
    std::vector<double> radius(m, cfg.initial_radius);
    for (const auto& b : blocks) {
        if (!(b.c > 0.0)) {
            throw Error(ErrorCode::empty_search_domain, "convolution penalty constant must be positive");
        }
    }
    for (std::size_t a = 0; a < m; ++a) {
        const PenaltyBlock* blk = &blocks.front();
        for (const auto& b : blocks) {
            if (a >= b.begin && a < b.begin + b.len) {
                blk = &b;
            }
        }
        while (radius[a] < cfg.max_radius) {
            const double pen = blk->c * std::pow(radius[a], blk->alpha);
            bool ok = true;
            for (double sgn : {-1.0, 1.0}) {
                w[a] = x[a] + sgn * radius[a];
                if (!(base(std::span<const double>(w)) + pen > at_centre)) {
                    ok = false;
                }
            }
            w[a] = x[a];
            if (ok) {
                break;
            }
            radius[a] *= 2.0;
        }
    }
    return radius;
}

/// Grid search with the given radii followed by golden refinement.
template <class Base>
double penalized_min_fixed(Base&& base, std::span<const double> x, const std::vector<PenaltyBlock>& blocks,
                           const std::vector<double>& radius, const SearchConfig& cfg) {
    const std::size_t m = x.size();
    std::vector<double> w(x.begin(), x.end());
    const double at_centre = base(std::span<const double>(w));
    if (std::isnan(at_centre)) {
        return at_centre;
    }
    std::size_t pts = m == 1 ? cfg.points : cfg.points_multi;
    if (pts < 3) {
        throw Error(ErrorCode::empty_search_domain, "search grid needs at least 3 points per axis");
    }
    if (pts % 2 == 0) {
        ++pts;
    }
    const long mid = static_cast<long>(pts / 2);
    std::vector<double> step(m);
    for (std::size_t a = 0; a < m; ++a) {
        step[a] = radius[a] / static_cast<double>(mid);
    }
    double best = at_centre;
    std::vector<double> best_w(x.begin(), x.end());
    std::vector<std::size_t> idx(m, 0);
    while (true) {
        for (std::size_t a = 0; a < m; ++a) {
            w[a] = x[a] + static_cast<double>(static_cast<long>(idx[a]) - mid) * step[a];
        }
        const double v = base(std::span<const double>(w)) + block_penalty(blocks, w, x);
        if (v < best) {
            best = v;
            best_w = w;
        }
        std::size_t a = 0;
        while (a < m && ++idx[a] == pts) {
            idx[a] = 0;
            ++a;
        }
        if (a == m) {
            break;
        }
    }
    if (cfg.golden) {
        w = best_w;
        for (std::size_t a = 0; a < m; ++a) {
            const double centre = w[a];
            auto along = [&](double u) {
                w[a] = u;
                return base(std::span<const double>(w)) + block_penalty(blocks, w, x);
            };
            double arg = centre;
            const double v = golden_min(along, centre - step[a], centre + step[a], cfg.golden_iterations, arg);
            if (v < best) {
                best = v;
                w[a] = arg;
            } else {
                w[a] = centre;
            }
        }
    }
    return best;
}

/**
 * y-slice of the z-convolution at a fixed (point, z). The search radius is
 * fixed by the first query, so the slice is continuous in y: the grid
 * stays put and only the driver values under it move.
 */
inline YSlice z_conv_slice(const GeneratorSpec& g, const EvalPoint& p, std::span<const double> z, double c,
                           double alpha, double sign, const SearchConfig& cfg) {
    struct State {
        BoundPoint at;
        double radius = -1.0;
    };
    auto st = std::make_shared<State>(State{BoundPoint(p, z)});
    return [g, st, c, alpha, sign, cfg](double y) {
        const EvalPoint pt = st->at.point();
        const auto zc = st->at.z();
        std::vector<PenaltyBlock> blocks{{0, zc.size(), c, alpha}};
        auto base = [&](std::span<const double> u) { return sign * g(pt, y, u); };
        if (st->radius < 0.0) {
            const auto r = search_radii(base, zc, blocks, cfg);
            st->radius = *std::max_element(r.begin(), r.end());
        }
        const std::vector<double> radius(zc.size(), st->radius);
        return sign * penalized_min_fixed(base, zc, blocks, radius, cfg);
    };
}

/**
 * y-slice of the (y, z)-convolution. The penalty is separable, so
 *   inf_{u,v} g(u, v) + cy |u - y| + cz |v - z|^alpha = inf_u cy |u - y| + G(u),
 *   G(u) = inf_v g(u, v) + cz |v - z|^alpha.
 * G is a one-axis search at fixed z. Outer candidates are u = y itself plus
 * the points of a grid anchored at multiples of a fixed spacing inside a
 * fixed window around y; G on anchored points is memoized, so successive
 * y queries of one root solve share work and the slice is continuous in y.
 */
inline YSlice yz_conv_slice(const GeneratorSpec& g, const EvalPoint& p, std::span<const double> z, double cy,
                            double cz, double alpha, double sign, const SearchConfig& cfg) {
    struct State {
        BoundPoint at;
        bool ready = false;
        double v_radius = 0.0;
        double u_radius = 0.0;
        double u_step = 0.0;
        std::map<long, double> memo;
    };
    auto st = std::make_shared<State>(State{BoundPoint(p, z)});
    return [g, st, cy, cz, alpha, sign, cfg](double y) {
        const EvalPoint pt = st->at.point();
        const auto zc = st->at.z();
        const std::vector<PenaltyBlock> vblocks{{0, zc.size(), cz, alpha}};
        auto inner = [&](double u) {
            auto base = [&](std::span<const double> v) { return sign * g(pt, u, v); };
            const std::vector<double> radius(zc.size(), st->v_radius);
            SearchConfig one = cfg;
            if (zc.size() > 1) {
                one.points = cfg.points_multi;
            }
            return penalized_min_fixed(base, zc, vblocks, radius, one);
        };
        if (!st->ready) {
            auto vbase = [&](std::span<const double> v) { return sign * g(pt, y, v); };
            const auto rv = search_radii(vbase, zc, vblocks, cfg);
            st->v_radius = *std::max_element(rv.begin(), rv.end());
            const std::vector<double> yc{y};
            const std::vector<PenaltyBlock> ublocks{{0, 1, cy, 1.0}};
            auto ubase = [&](std::span<const double> u) { return inner(u[0]); };
            st->u_radius = search_radii(ubase, yc, ublocks, cfg)[0];
            const std::size_t half = std::max<std::size_t>(1, cfg.points_multi / 2);
            st->u_step = st->u_radius / static_cast<double>(half);
            st->ready = true;
        }
        double best = inner(y);
        if (!std::isfinite(y)) {
            return sign * best;
        }
        if (std::fabs(y) / st->u_step > 0x1p52) {
            // Anchored indices no longer fit; use a grid centred on y instead.
            const long half = static_cast<long>(std::ceil(st->u_radius / st->u_step));
            for (long j = -half; j <= half; ++j) {
                const double u = y + static_cast<double>(j) * st->u_step;
                best = std::min(best, inner(u) + cy * std::fabs(u - y));
            }
            return sign * best;
        }
        const long lo = static_cast<long>(std::ceil((y - st->u_radius) / st->u_step));
        const long hi = static_cast<long>(std::floor((y + st->u_radius) / st->u_step));
        for (long j = lo; j <= hi; ++j) {
            const double u = static_cast<double>(j) * st->u_step;
            auto it = st->memo.find(j);
            if (it == st->memo.end()) {
                it = st->memo.emplace(j, inner(u)).first;
            }
            best = std::min(best, it->second + cy * std::fabs(u - y));
        }
        return sign * best;
    };
}

inline GeneratorSpec make_z_convolution(const GeneratorSpec& g, double n, double lambda, double alpha,
                                        const SearchConfig& cfg, double sign) {
    check_exponent(alpha);
    const double c = n + 2.0 * lambda;
    GeneratorSpec out(g.id() + (sign > 0 ? "^inf_z" : "^sup_z"),
                      [g, c, alpha, sign, cfg](const EvalPoint& p, double y, std::span<const double> z) {
                          return z_conv_slice(g, p, z, c, alpha, sign, cfg)(y);
                      });
    out.set_slicer([g, c, alpha, sign, cfg](const EvalPoint& p, std::span<const double> z) {
        return z_conv_slice(g, p, z, c, alpha, sign, cfg);
    });
    std::set<AssumptionClass> declared{AssumptionClass::H2i, AssumptionClass::H2ii};
    if (g.declares(AssumptionClass::H1i)) {
        declared.insert(AssumptionClass::H1i);
    }
    out.declared() = declared;
    out.params() = holder_params(g.params(), c, alpha);
    return out;
}

inline GeneratorSpec make_yz_convolution(const GeneratorSpec& g, double n, double mu_tilde, double lambda_tilde,
                                         double alpha_tilde, const SearchConfig& cfg, double sign) {
    check_exponent(alpha_tilde);
    const double cy = n + 2.0 * mu_tilde;
    const double cz = n + 2.0 * lambda_tilde;
    GeneratorSpec out(g.id() + (sign > 0 ? "^inf_yz" : "^sup_yz"),
                      [g, cy, cz, alpha_tilde, sign, cfg](const EvalPoint& p, double y, std::span<const double> z) {
                          return yz_conv_slice(g, p, z, cy, cz, alpha_tilde, sign, cfg)(y);
                      });
    out.set_slicer([g, cy, cz, alpha_tilde, sign, cfg](const EvalPoint& p, std::span<const double> z) {
        return yz_conv_slice(g, p, z, cy, cz, alpha_tilde, sign, cfg);
    });
    out.declared() = {AssumptionClass::H1i, AssumptionClass::H2i, AssumptionClass::H2ii};
    GeneratorParams q = holder_params(GeneratorParams{}, cz, alpha_tilde);
    // Lipschitz in y with constant cy after the y-convolution.
    q.rho = [cy](double x) { return cy * x; };
    q.linear_growth = cy;
    out.params() = q;
    return out;
}

} // namespace detail

/// inf_u g(t, y, u) + (n + 2 lambda) |u - z|^alpha.
inline GeneratorSpec inf_convolve_z(const GeneratorSpec& g, double n, double lambda, double alpha,
                                    const SearchConfig& cfg = {}) {
    return detail::make_z_convolution(g, n, lambda, alpha, cfg, 1.0);
}

/// sup_u g(t, y, u) - (n + 2 lambda) |u - z|^alpha.
inline GeneratorSpec sup_convolve_z(const GeneratorSpec& g, double n, double lambda, double alpha,
                                    const SearchConfig& cfg = {}) {
    return detail::make_z_convolution(g, n, lambda, alpha, cfg, -1.0);
}

/// inf_{u,v} g(t, u, v) + (n + 2 mu~) |u - y| + (n + 2 lambda~) |v - z|^alpha~.
inline GeneratorSpec inf_convolve_yz(const GeneratorSpec& g, double n, double mu_tilde, double lambda_tilde,
                                     double alpha_tilde, const SearchConfig& cfg = {}) {
    return detail::make_yz_convolution(g, n, mu_tilde, lambda_tilde, alpha_tilde, cfg, 1.0);
}

/// sup_{u,v} g(t, u, v) - (n + 2 mu~) |u - y| - (n + 2 lambda~) |v - z|^alpha~.
inline GeneratorSpec sup_convolve_yz(const GeneratorSpec& g, double n, double mu_tilde, double lambda_tilde,
                                     double alpha_tilde, const SearchConfig& cfg = {}) {
    return detail::make_yz_convolution(g, n, mu_tilde, lambda_tilde, alpha_tilde, cfg, -1.0);
}

} // namespace l1bsde
