#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

namespace l1bsde {

struct RootConfig {
    double tol = 1e-12;
    std::size_t max_iter = 200;
    /// Picard relaxation weight in (0, 1].
    double damping = 1.0;
    /// Skip Picard and go straight to bracketing (stiff penalized steps).
    bool force_bracketing = false;
};

struct RootResult {
    double y = 0.0;
    /// |y - rhs(y)| / max(1, |y|).
    double residual = 0.0;
    std::size_t iterations = 0;
    bool bracketed = false;
    bool converged = false;
};

namespace detail {

inline double rel(double r, double y) { return std::fabs(r) / std::max(1.0, std::fabs(y)); }

/// Two doubles with nothing (or almost nothing) representable between them.
inline bool collapsed(double a, double b) {
    const double gap = std::fabs(b - a);
    return gap <= 4.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::fabs(a), std::fabs(b)});
}

} // namespace detail

/**
 * Solves y = rhs(y). Damped Picard from `start` first; if that stalls or
 * blows up, expands a bracket around `start` until y - rhs(y) changes sign
 * and finishes with TOMS 748. When the residual cannot reach `tol` because
 * the bracket has shrunk to adjacent doubles (a jump or extreme scale in
 * rhs), the closer endpoint is returned and `converged` reflects whether
 * the tolerance was met.
 */
template <class Rhs>
RootResult solve_fixed_point(Rhs&& rhs, double start, const RootConfig& cfg) {
    RootResult out;
    auto r = [&](double y) { return y - rhs(y); };
    double y = start;
    if (!cfg.force_bracketing) {
        double prev_y = 0.0;
        double prev_r = 0.0;
        for (std::size_t it = 0; it < cfg.max_iter; ++it) {
            const double f = rhs(y);
            ++out.iterations;
            if (!std::isfinite(f)) {
                break;
            }
            const double res = detail::rel(y - f, y);
            if (res <= cfg.tol) {
                out.y = y;
                out.residual = res;
                out.converged = true;
                // One secant step on the last two iterates. Without it two
                // runs that stop at different points inside the tolerance
                // drift apart by a few tol per time step.
                const double rr = y - f;
                if (it > 0 && rr != 0.0 && rr != prev_r) {
                    const double cand = y - rr * (y - prev_y) / (rr - prev_r);
                    const double fc = std::isfinite(cand) ? rhs(cand) : cand;
                    ++out.iterations;
                    if (std::isfinite(fc) && detail::rel(cand - fc, cand) < res) {
                        out.y = cand;
                        out.residual = detail::rel(cand - fc, cand);
                    }
                }
                return out;
            }
            prev_y = y;
            prev_r = y - f;
            const double next = y + cfg.damping * (f - y);
            if (!std::isfinite(next) || std::fabs(next - start) > 1e12 * std::max(1.0, std::fabs(start))) {
                break;
            }
            y = next;
        }
    }
    // Bracketing on y - rhs(y).
    out.bracketed = true;
    double r0 = r(start);
    ++out.iterations;
    if (r0 == 0.0) {
        out.y = start;
        out.converged = true;
        return out;
    }
    if (std::isnan(r0)) {
        out.y = start;
        out.residual = std::numeric_limits<double>::infinity();
        return out;
    }
    // A root of an increasing residual lies below start when r0 > 0; a
    // decreasing one (non-contractive step) is searched on the other side.
    const double first_dir = r0 > 0.0 ? -1.0 : 1.0;
    // Doubling from a unit-scale step keeps an astronomically large r0 from
    // producing a bracket too wide to shrink.
    const double scale = std::max(1.0, std::fabs(start));
    double a = start;
    double ra = r0;
    double b = start;
    double rb = r0;
    bool found = false;
    for (double dir : {first_dir, -first_dir}) {
        double step = std::max(std::min(std::fabs(r0), scale), cfg.tol * scale);
        a = start;
        ra = r0;
        for (int expand = 0; expand < 2100; ++expand) {
            b = start + dir * step;
            rb = r(b);
            ++out.iterations;
            if (std::isfinite(rb) && (rb == 0.0 || (rb > 0.0) != (ra > 0.0))) {
                found = true;
                break;
            }
            if (std::isfinite(rb)) {
                a = b;
                ra = rb;
            } else {
                step *= 0.5;
                continue;
            }
            step *= 2.0;
            if (!std::isfinite(step)) {
                break;
            }
        }
        if (found) {
            break;
        }
    }
    if (!found) {
        out.y = a;
        out.residual = detail::rel(ra, a);
        return out;
    }
    if (rb == 0.0) {
        out.y = b;
        out.converged = true;
        return out;
    }
    double lo = std::min(a, b);
    double hi = std::max(a, b);
    double flo = lo == a ? ra : rb;
    double fhi = hi == a ? ra : rb;
    // Run to a collapsed bracket: with a steep residual, a bracket of width
    // tol can still leave both endpoints above tolerance.
    auto stop = [](double u, double v) { return detail::collapsed(u, v); };
    // Enough for plain bisection across the whole double range.
    std::uintmax_t iters = 2200;
    auto bracket = boost::math::tools::toms748_solve(r, lo, hi, flo, fhi, stop, iters);
    out.iterations += static_cast<std::size_t>(iters);
    const double ylo = bracket.first;
    const double yhi = bracket.second;
    const double rlo = r(ylo);
    const double rhi = r(yhi);
    if (std::fabs(rlo) <= std::fabs(rhi)) {
        out.y = ylo;
        out.residual = detail::rel(rlo, ylo);
    } else {
        out.y = yhi;
        out.residual = detail::rel(rhi, yhi);
    }
    out.converged = out.residual <= cfg.tol || detail::collapsed(ylo, yhi);
    return out;
}

} // namespace l1bsde
