#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "l1bsde/convolution.hpp"
#include "l1bsde/norms.hpp"
#include "l1bsde/parallel.hpp"
#include "l1bsde/penalization.hpp"
#include "l1bsde/philox.hpp"
#include "l1bsde/reflected.hpp"
#include "l1bsde/validators.hpp"

namespace l1bsde {

// Mokobodzki witness --------------------------------------------------------

enum class WitnessStrategy { use_drbsde_solution, user_supplied };

/**
 * X = X_0 + sum dC + sum H . dB between the barriers. Built from a
 * two-barrier solution the way the necessity proof does it: X = Y, H = Z,
 * dC = -g dt - dV - dK + dA.
 */
struct MokobodzkiWitness {
    NodeProcess X;
    NodeProcess dC;
    VectorProcess H;
    /// E[sum |dC|].
    double c_variation = 0.0;
    /// E[sum |g(t, X, 0)| dt].
    double g_at_X_norm = 0.0;
    bool g_at_X_finite = true;
    bool sandwich_ok = true;
    std::optional<NodeRef> sandwich_violation;
    /// max over nodes and branches of |X_{k+1} - (X_k + dC_k + H_k . dB)|.
    double decomposition_residual = 0.0;
};

namespace detail {

inline double decomposition_residual(const BrownianLattice& lattice, const NodeProcess& x, const NodeProcess& dc,
                                     const VectorProcess& h) {
    const std::size_t d = lattice.dim();
    double worst = 0.0;
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            const auto hz = h.at(k, i);
            for (std::size_t b = 0; b < lattice.branch_count(); ++b) {
                double mart = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    mart += hz[c] * lattice.increment(b, c);
                }
                const double next = x.at(k + 1, lattice.child(k, i, b));
                worst = std::max(worst, std::fabs(next - (x.at(k, i) + dc.at(k, i) + mart)));
            }
        }
    }
    return worst;
}

inline void finish_witness(const BrownianLattice& lattice, const GeneratorSpec& g, const BarrierPair& barriers,
                           MokobodzkiWitness& w) {
    const std::size_t d = lattice.dim();
    const std::vector<double> zero(d, 0.0);
    std::array<double, BrownianLattice::max_dim> st{};
    for (std::size_t k = 0; k <= lattice.n_steps() && w.sandwich_ok; ++k) {
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            const double x = w.X.at(k, i);
            if (x < barriers.lower.at(k, i) || x > barriers.upper.at(k, i)) {
                w.sandwich_ok = false;
                w.sandwich_violation = NodeRef{k, i};
                break;
            }
        }
    }
    double cvar = 0.0;
    double gx = 0.0;
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        const auto wt = lattice.node_weights(k);
        const double t = lattice.grid().time(k);
        for (std::size_t i = 0; i < wt.size(); ++i) {
            lattice.state(k, i, std::span<double>(st.data(), d));
            const EvalPoint p{t, k, i, std::span<const double>(st.data(), d)};
            cvar += wt[i] * std::fabs(w.dC.at(k, i));
            gx += wt[i] * std::fabs(g(p, w.X.at(k, i), zero)) * lattice.dt();
        }
    }
    w.c_variation = cvar;
    w.g_at_X_norm = gx;
    w.g_at_X_finite = std::isfinite(gx);
    w.decomposition_residual = decomposition_residual(lattice, w.X, w.dC, w.H);
}

} // namespace detail

/// Witness assembled from a solved two-barrier problem.
inline MokobodzkiWitness witness_from_solution(const BrownianLattice& lattice, const GeneratorSpec& g,
                                               const ForcingTerm& V, const BarrierPair& barriers,
                                               const SolutionQuadruple& q) {
    MokobodzkiWitness w;
    w.X = q.Y;
    w.H = q.Z;
    w.dC = lattice.zeros();
    const double dt = lattice.dt();
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            w.dC.at(k, i) = -q.drift.at(k, i) * dt - V.at(k, i) - q.dK.at(k, i) + q.dA.at(k, i);
        }
    }
    detail::finish_witness(lattice, g, barriers, w);
    return w;
}

/// Witness from a user-supplied X: H is its martingale coefficient and dC the predictable drift.
inline MokobodzkiWitness witness_from_process(const BrownianLattice& lattice, const GeneratorSpec& g,
                                              const BarrierPair& barriers, const NodeProcess& x) {
    const auto sizes = lattice.sizes();
    if (x.step_count() != sizes.size()) {
        throw Error(ErrorCode::invalid_argument, "witness process does not match the lattice");
    }
    MokobodzkiWitness w;
    w.X = x;
    w.H = VectorProcess(lattice.dim(), sizes);
    w.dC = lattice.zeros();
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        const auto next = x.step(k + 1);
        const auto e = conditional_expectation(lattice, next, k);
        const auto z = martingale_coefficient(lattice, next, k);
        std::copy(z.begin(), z.end(), w.H.step(k).begin());
        for (std::size_t i = 0; i < e.size(); ++i) {
            w.dC.at(k, i) = e[i] - x.at(k, i);
        }
    }
    detail::finish_witness(lattice, g, barriers, w);
    return w;
}

inline MokobodzkiWitness mokobodzki_check(const BrownianLattice& lattice, const std::vector<double>& xi,
                                          const GeneratorSpec& g, const ForcingTerm& V, const BarrierPair& barriers,
                                          WitnessStrategy strategy, const NumericsConfig& numerics = {},
                                          const NodeProcess* user_x = nullptr) {
    if (strategy == WitnessStrategy::user_supplied) {
        if (user_x == nullptr) {
            throw Error(ErrorCode::invalid_argument, "user_supplied witness strategy without a witness process");
        }
        return witness_from_process(lattice, g, barriers, *user_x);
    }
    const auto q = solve_drbsde(lattice, xi, g, V, barriers, numerics);
    return witness_from_solution(lattice, g, V, barriers, q);
}

// Comparison battery --------------------------------------------------------

enum class ProblemKind { bsde, rbsde_lower, rbsde_upper, drbsde };
/// Which hypothesis of the comparison theorem a case instantiates.
enum class ComparisonBranch { pointwise, one_sided_first, one_sided_second };
enum class DriverClass { lipschitz, osgood };

inline const char* to_string(ProblemKind k) {
    switch (k) {
    case ProblemKind::bsde: return "bsde";
    case ProblemKind::rbsde_lower: return "rbsde_lower";
    case ProblemKind::rbsde_upper: return "rbsde_upper";
    case ProblemKind::drbsde: return "drbsde";
    }
    return "?";
}

inline const char* to_string(ComparisonBranch b) {
    switch (b) {
    case ComparisonBranch::pointwise: return "pointwise";
    case ComparisonBranch::one_sided_first: return "one_sided_first";
    case ComparisonBranch::one_sided_second: return "one_sided_second";
    }
    return "?";
}

inline const char* to_string(DriverClass c) { return c == DriverClass::lipschitz ? "lipschitz" : "osgood"; }

/**
 * Two problems with ordered data. For the one-sided branches g1 (resp. g2)
 * is the base driver tilted by tilt * (y - M), where M is the largest value
 * of the other solution; this makes the indicator hypothesis hold along
 * the solution while g1 <= g2 fails pointwise.
 */
struct ComparisonCase {
    std::string id;
    ProblemKind kind = ProblemKind::bsde;
    ComparisonBranch branch = ComparisonBranch::pointwise;
    DriverClass cls = DriverClass::lipschitz;
    double horizon = 1.0;
    std::size_t n_steps = 16;
    std::size_t dim = 1;
    std::vector<double> xi1, xi2;
    GeneratorSpec g1, g2;
    ForcingTerm v1, v2;
    BarrierPair b1, b2;
    bool equal_barriers = false;
    double tilt = 0.0;
};

struct ComparisonEvidence {
    NodeProcess y1, y2, dk1, dk2, da1, da2;
};

struct ComparisonOutcome {
    std::string id;
    ProblemKind kind = ProblemKind::bsde;
    ComparisonBranch branch = ComparisonBranch::pointwise;
    DriverClass cls = DriverClass::lipschitz;
    Verdict verdict = Verdict::pass;
    /// max (Y1 - Y2); nonpositive when the order holds.
    double y_margin = 0.0;
    NodeRef y_node{};
    bool y_ok = true;
    bool increments_checked = false;
    bool k_ok = true;
    bool a_ok = true;
    double k_margin = 0.0;
    double a_margin = 0.0;
    bool hypothesis_ok = true;
    double root_gap = 0.0;
    std::string note;
    /// Kept for failures so they can be rechecked outside the battery.
    std::optional<ComparisonEvidence> evidence;
};

struct ComparisonReport {
    std::vector<ComparisonOutcome> outcomes;
    std::size_t lipschitz_cases = 0;
    std::size_t lipschitz_y_pass = 0;
    std::size_t equal_barrier_cases = 0;
    std::size_t increment_pass = 0;
    std::size_t osgood_cases = 0;
    std::size_t osgood_pass = 0;
    std::size_t osgood_inconclusive = 0;
    std::size_t osgood_confirmed = 0;
    std::size_t errors = 0;

    bool all_ok() const {
        return errors == 0 && lipschitz_y_pass == lipschitz_cases && increment_pass == equal_barrier_cases &&
               osgood_confirmed == 0;
    }
};

struct ComparisonConfig {
    NumericsConfig numerics;
    /// Relative slack for Y1 <= Y2 and for the increment orders.
    double tol = 1e-9;
    std::size_t threads = 1;
};

namespace detail {

inline SolutionQuadruple solve_kind(const BrownianLattice& lattice, ProblemKind kind, const std::vector<double>& xi,
                                    const GeneratorSpec& g, const ForcingTerm& v, const BarrierPair& b,
                                    const NumericsConfig& num) {
    switch (kind) {
    case ProblemKind::bsde: return solve_bsde(lattice, xi, g, v, num);
    case ProblemKind::rbsde_lower: return solve_rbsde_lower(lattice, xi, g, v, b.lower, num);
    case ProblemKind::rbsde_upper: return solve_rbsde_upper(lattice, xi, g, v, b.upper, num);
    case ProblemKind::drbsde: return solve_drbsde(lattice, xi, g, v, b, num);
    }
    throw Error(ErrorCode::invalid_argument, "unknown problem kind");
}

inline double process_max(const NodeProcess& y) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < y.step_count(); ++k) {
        for (double v : y.step(k)) {
            m = std::max(m, v);
        }
    }
    return m;
}

inline GeneratorSpec tilted(const GeneratorSpec& g, double slope, double level) {
    GeneratorSpec out(g.id() + "+tilt", [g, slope, level](const EvalPoint& p, double y, std::span<const double> z) {
        return g(p, y, z) + slope * (y - level);
    });
    out.declared() = g.declared();
    out.params() = g.params();
    if (g.params().linear_growth) {
        out.params().linear_growth = *g.params().linear_growth + std::max(slope, 0.0);
    }
    return out;
}

/// max over nodes with Y1 > Y2 of (g1 - g2) evaluated at (Y, Z) of the given solution.
inline double indicator_hypothesis(const BrownianLattice& lattice, const GeneratorSpec& g1, const GeneratorSpec& g2,
                                   const SolutionQuadruple& s1, const SolutionQuadruple& s2,
                                   const SolutionQuadruple& at) {
    const std::size_t d = lattice.dim();
    std::array<double, BrownianLattice::max_dim> st{};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
        for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
            if (!(s1.Y.at(k, i) > s2.Y.at(k, i))) {
                continue;
            }
            lattice.state(k, i, std::span<double>(st.data(), d));
            const EvalPoint p{lattice.grid().time(k), k, i, std::span<const double>(st.data(), d)};
            const double y = at.Y.at(k, i);
            const auto z = at.Z.at(k, i);
            worst = std::max(worst, g1(p, y, z) - g2(p, y, z));
        }
    }
    return worst;
}

} // namespace detail

inline bool increment_case(const ComparisonCase& c) {
    return c.equal_barriers && c.kind != ProblemKind::bsde && c.branch == ComparisonBranch::pointwise;
}

inline ComparisonOutcome run_comparison_case(const ComparisonCase& c, const ComparisonConfig& cfg = {}) {
    ComparisonOutcome out;
    out.id = c.id;
    out.kind = c.kind;
    out.branch = c.branch;
    out.cls = c.cls;
    const BrownianLattice lattice(TimeGrid(c.horizon, c.n_steps), c.dim);
    NumericsConfig num = cfg.numerics;
    num.threads = 1;
    GeneratorSpec g1 = c.g1;
    GeneratorSpec g2 = c.g2;
    SolutionQuadruple s1, s2;
    try {
        switch (c.branch) {
        case ComparisonBranch::pointwise:
            s1 = detail::solve_kind(lattice, c.kind, c.xi1, g1, c.v1, c.b1, num);
            s2 = detail::solve_kind(lattice, c.kind, c.xi2, g2, c.v2, c.b2, num);
            break;
        case ComparisonBranch::one_sided_first:
            s2 = detail::solve_kind(lattice, c.kind, c.xi2, g2, c.v2, c.b2, num);
            g1 = detail::tilted(g1, c.tilt, detail::process_max(s2.Y));
            s1 = detail::solve_kind(lattice, c.kind, c.xi1, g1, c.v1, c.b1, num);
            break;
        case ComparisonBranch::one_sided_second:
            s1 = detail::solve_kind(lattice, c.kind, c.xi1, g1, c.v1, c.b1, num);
            g2 = detail::tilted(g2, -c.tilt, detail::process_max(s1.Y));
            s2 = detail::solve_kind(lattice, c.kind, c.xi2, g2, c.v2, c.b2, num);
            break;
        }
    } catch (const Error& e) {
        out.verdict = Verdict::inconclusive;
        out.note = e.what();
        return out;
    }
    if (c.branch == ComparisonBranch::one_sided_first) {
        out.hypothesis_ok = !(detail::indicator_hypothesis(lattice, g1, g2, s1, s2, s2) > 0.0);
    } else if (c.branch == ComparisonBranch::one_sided_second) {
        out.hypothesis_ok = !(detail::indicator_hypothesis(lattice, g1, g2, s1, s2, s1) > 0.0);
    }
    out.y_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s1.Y.step_count(); ++k) {
        for (std::size_t i = 0; i < s1.Y.size(k); ++i) {
            const double m = s1.Y.at(k, i) - s2.Y.at(k, i);
            if (m > out.y_margin) {
                out.y_margin = m;
                out.y_node = NodeRef{k, i};
            }
            if (m > cfg.tol * std::max(1.0, std::fabs(s2.Y.at(k, i)))) {
                out.y_ok = false;
            }
        }
    }
    // The increment order needs g1 <= g2 everywhere, so the one-sided
    // branches are checked for Y only.
    if (increment_case(c)) {
        out.increments_checked = true;
        for (std::size_t k = 0; k < lattice.n_steps(); ++k) {
            for (std::size_t i = 0; i < lattice.node_count(k); ++i) {
                const double km = s2.dK.at(k, i) - s1.dK.at(k, i);
                const double am = s1.dA.at(k, i) - s2.dA.at(k, i);
                out.k_margin = std::max(out.k_margin, km);
                out.a_margin = std::max(out.a_margin, am);
                const double slack = cfg.tol * std::max(1.0, std::fabs(s1.Y.at(k, i)));
                if (km > slack) {
                    out.k_ok = false;
                }
                if (am > slack) {
                    out.a_ok = false;
                }
            }
        }
    }
    const bool ok = out.y_ok && out.k_ok && out.a_ok;
    if (!out.hypothesis_ok) {
        out.verdict = Verdict::inconclusive;
        out.note = "indicator hypothesis not met along the solution";
    } else if (ok) {
        out.verdict = Verdict::pass;
    } else if (c.cls == DriverClass::osgood) {
        // The implicit step of a non-Lipschitz driver may admit several
        // roots; a violation no larger than the spread between roots found
        // from shifted starting points cannot be told apart from that.
        double spread = 0.0;
        for (double off : {-1.0, 1.0}) {
            NumericsConfig shifted = num;
            shifted.start_offset = off;
            try {
                const auto r1 = detail::solve_kind(lattice, c.kind, c.xi1, g1, c.v1, c.b1, shifted);
                const auto r2 = detail::solve_kind(lattice, c.kind, c.xi2, g2, c.v2, c.b2, shifted);
                spread = std::max({spread, norms::sup_node_gap(r1.Y, s1.Y), norms::sup_node_gap(r2.Y, s2.Y)});
            } catch (const Error&) {
                spread = std::numeric_limits<double>::infinity();
            }
        }
        out.root_gap = spread;
        const double margin = std::max({out.y_margin, out.k_margin, out.a_margin});
        out.verdict = margin <= spread + cfg.tol ? Verdict::inconclusive : Verdict::fail;
    } else {
        out.verdict = Verdict::fail;
    }
    if (out.verdict == Verdict::fail) {
        out.evidence = ComparisonEvidence{s1.Y, s2.Y, s1.dK, s2.dK, s1.dA, s2.dA};
    }
    return out;
}

/// Recomputes a failure's Y margin from the stored solutions alone.
inline bool reverify_failure(const ComparisonOutcome& o, double tol = 1e-9) {
    if (!o.evidence) {
        return false;
    }
    const auto& e = *o.evidence;
    for (std::size_t k = 0; k < e.y1.step_count(); ++k) {
        for (std::size_t i = 0; i < e.y1.size(k); ++i) {
            const double slack = tol * std::max(1.0, std::fabs(e.y2.at(k, i)));
            if (e.y1.at(k, i) - e.y2.at(k, i) > slack) {
                return true;
            }
            if (k + 1 < e.y1.step_count() &&
                (e.dk2.at(k, i) - e.dk1.at(k, i) > slack || e.da1.at(k, i) - e.da2.at(k, i) > slack)) {
                return true;
            }
        }
    }
    return false;
}

inline ComparisonReport comparison_battery(const std::vector<ComparisonCase>& cases, const ComparisonConfig& cfg = {}) {
    ComparisonReport r;
    r.outcomes.resize(cases.size());
    parallel_for(cases.size(), cfg.threads, [&](std::size_t j) { r.outcomes[j] = run_comparison_case(cases[j], cfg); });
    for (std::size_t j = 0; j < cases.size(); ++j) {
        const auto& o = r.outcomes[j];
        const bool errored = o.verdict == Verdict::inconclusive && o.hypothesis_ok && o.cls == DriverClass::lipschitz;
        if (errored) {
            ++r.errors;
        }
        if (o.cls == DriverClass::lipschitz) {
            ++r.lipschitz_cases;
            if (o.y_ok && o.verdict != Verdict::inconclusive) {
                ++r.lipschitz_y_pass;
            }
        } else {
            ++r.osgood_cases;
            if (o.verdict == Verdict::pass) {
                ++r.osgood_pass;
            } else if (o.verdict == Verdict::inconclusive) {
                ++r.osgood_inconclusive;
            } else {
                ++r.osgood_confirmed;
            }
        }
        if (increment_case(cases[j])) {
            ++r.equal_barrier_cases;
            if (o.increments_checked && o.k_ok && o.a_ok) {
                ++r.increment_pass;
            }
        }
    }
    return r;
}

namespace detail {

/// a y + 0.5 sin y + b . z + c (1 + sin(t + B_1)) - shift (1 + cos B_1); Lipschitz in y with |a| + 0.5.
inline GeneratorSpec battery_lipschitz(double a, std::vector<double> b, double c, double shift) {
    GeneratorParams p;
    const double lip = std::fabs(a) + 0.5;
    double bn = 0.0;
    for (double v : b) {
        bn += v * v;
    }
    bn = std::sqrt(bn);
    p.rho = [lip](double x) { return lip * x; };
    p.phi = [bn](double x) { return bn * x; };
    p.linear_growth = lip;
    auto eval = [a, b, c, shift](const EvalPoint& pt, double y, std::span<const double> z) {
        double s = a * y + 0.5 * std::sin(y) + c * (1.0 + std::sin(pt.t + pt.state[0])) -
                   shift * (1.0 + std::cos(pt.state[0]));
        for (std::size_t i = 0; i < b.size() && i < z.size(); ++i) {
            s += b[i] * z[i];
        }
        return s;
    };
    return GeneratorSpec("battery-lipschitz", std::move(eval), {AssumptionClass::H1i, AssumptionClass::H2i},
                         std::move(p));
}

/// -y ln|y| + b z + c - shift: one-sided Osgood near y = 0, not Lipschitz there.
inline GeneratorSpec battery_osgood(double b, double c, double shift) {
    GeneratorParams p;
    p.rho = [](double x) { return x > 0.0 && x < std::exp(-1.0) ? -x * std::log(x) : x; };
    auto eval = [b, c, shift](const EvalPoint&, double y, std::span<const double> z) {
        const double ay = std::fabs(y);
        const double ent = ay > 0.0 ? -y * std::log(ay) : 0.0;
        return ent + b * z[0] + c - shift;
    };
    return GeneratorSpec("battery-osgood", std::move(eval), {AssumptionClass::H1i}, std::move(p));
}

} // namespace detail

/**
 * Deterministic randomized cases. Every tenth case uses the Osgood driver
 * on a 128-step grid; the rest use Lipschitz drivers whose z-coefficients
 * satisfy |b|_1 sqrt(dt) <= 1, the condition under which the binomial
 * scheme itself is order preserving.
 */
inline std::vector<ComparisonCase> generate_comparison_cases(std::size_t count = 200, std::uint64_t seed = 7) {
    std::vector<ComparisonCase> out;
    out.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        std::size_t draw = 0;
        auto u = [&]() { return addressed_uniform(seed, j, draw++); };
        auto sym = [&](double s) { return s * (2.0 * u() - 1.0); };
        ComparisonCase c;
        c.id = "cmp-" + std::to_string(j);
        c.kind = static_cast<ProblemKind>(j % 4);
        c.cls = j % 10 == 9 ? DriverClass::osgood : DriverClass::lipschitz;
        c.branch = c.cls == DriverClass::osgood ? ComparisonBranch::pointwise
                                                : static_cast<ComparisonBranch>((j / 4) % 3);
        c.horizon = 1.0;
        if (c.cls == DriverClass::osgood) {
            c.n_steps = 128;
            c.dim = 1;
        } else {
            c.n_steps = std::array<std::size_t, 3>{8, 16, 32}[(j / 12) % 3];
            c.dim = j % 7 == 3 ? 2 : 1;
        }
        const bool identical = j % 25 == 0;
        const double dgap = identical ? 0.0 : 0.5 * u();
        const double shift = identical ? 0.0 : 0.5 * u();
        const double vgap = identical ? 0.0 : 0.3 * u();
        const double lgap = identical ? 0.0 : 0.2 * u();
        const double ugap = identical ? 0.0 : 0.2 * u();
        c.equal_barriers = identical || (j / 12) % 2 == 0;
        c.tilt = c.branch == ComparisonBranch::pointwise ? 0.0 : 0.2 + 0.5 * u();
        if (c.cls == DriverClass::osgood) {
            const double b = sym(1.0);
            const double cc = sym(0.5);
            c.g2 = detail::battery_osgood(b, cc, 0.0);
            c.g1 = detail::battery_osgood(b, cc, c.branch == ComparisonBranch::pointwise ? shift : 0.0);
        } else {
            const double a = sym(1.0);
            std::vector<double> b(c.dim);
            for (double& v : b) {
                v = sym(1.0) / static_cast<double>(c.dim);
            }
            const double cc = sym(1.0);
            c.g2 = detail::battery_lipschitz(a, b, cc, 0.0);
            c.g1 = detail::battery_lipschitz(a, b, cc, c.branch == ComparisonBranch::pointwise ? shift : 0.0);
        }
        const BrownianLattice lattice(TimeGrid(c.horizon, c.n_steps), c.dim);
        const double p0 = sym(0.5), p1 = sym(1.0), p2 = sym(0.5);
        c.xi1 = terminal_values(lattice, [&](std::span<const double> bt) {
            return p0 + p1 * bt[0] + p2 * std::sin(2.0 * bt[0]);
        });
        c.xi2 = c.xi1;
        const std::vector<double> xi_gap = terminal_values(lattice, [&](std::span<const double> bt) {
            const double s = 1.0 + std::sin(bt[0]);
            return dgap * s * s;
        });
        for (std::size_t i = 0; i < c.xi2.size(); ++i) {
            c.xi2[i] += xi_gap[i];
        }
        if (j % 3 != 0) {
            const double r = sym(1.0);
            c.v2 = ForcingTerm::from_rate(lattice, [r](double, std::span<const double> bt) { return r * std::cos(bt[0]); });
            c.v1 = ForcingTerm::from_rate(lattice,
                                          [r, vgap](double, std::span<const double> bt) { return r * std::cos(bt[0]) - vgap; });
        }
        if (c.kind != ProblemKind::bsde) {
            const double la = sym(0.3), ua = sym(0.3);
            const std::size_t n = c.n_steps;
            auto lower_at = [&](double extra, const std::vector<double>& clip) {
                return lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> bt) {
                    const double v = -0.6 + la * std::sin(bt[0]) + extra;
                    return k == n ? std::min(v, clip[i]) : v;
                });
            };
            auto upper_at = [&](double extra, const std::vector<double>& clip) {
                return lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> bt) {
                    const double v = 0.8 + ua * std::cos(bt[0]) - extra;
                    return k == n ? std::max(v, clip[i]) : v;
                });
            };
            if (c.equal_barriers) {
                const auto l = lower_at(0.0, c.xi1);
                const auto h = upper_at(0.0, c.xi2);
                c.b1 = BarrierPair{Barrier::lower(l), Barrier::upper(h)};
                c.b2 = c.b1;
            } else {
                c.b1 = BarrierPair{Barrier::lower(lower_at(0.0, c.xi1)), Barrier::upper(upper_at(ugap, c.xi1))};
                c.b2 = BarrierPair{Barrier::lower(lower_at(lgap, c.xi2)), Barrier::upper(upper_at(0.0, c.xi2))};
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

// Uniqueness probe ----------------------------------------------------------

struct UniquenessConfig {
    NumericsConfig numerics;
    std::vector<double> dampings{0.5, 0.8};
    std::vector<double> offsets{-1.0, 1.0, 10.0};
    std::vector<double> ladder_schedule{1, 4, 16, 64, 256, 1024};
    double ladder_tol = 2e-2;
    bool ladders = true;
};

struct UniquenessReport {
    bool in_class = false;
    /// max |Y - Y'| / max(1, |Y|), the scale the fixed-point tolerance is stated in.
    double direct_deviation = 0.0;
    bool ladders_run = false;
    double ladder_deviation = 0.0;
    Verdict verdict = Verdict::inconclusive;
    std::string note;
};

namespace detail {

inline double relative_gap(const NodeProcess& a, const NodeProcess& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.step_count(); ++k) {
        for (std::size_t i = 0; i < a.size(k); ++i) {
            worst = std::max(worst, std::fabs(a.at(k, i) - b.at(k, i)) / std::max(1.0, std::fabs(a.at(k, i))));
        }
    }
    return worst;
}

} // namespace detail

/**
 * Reruns the direct scheme from other dampings and starting points, then
 * (with barriers) compares the one-sided penalization limits. Drivers
 * outside H1(i) + H2(i) are probed but never asserted.
 */
inline UniquenessReport uniqueness_probe(const BrownianLattice& lattice, const std::vector<double>& xi,
                                         const GeneratorSpec& g, const ForcingTerm& V, const BarrierPair& barriers,
                                         const UniquenessConfig& cfg = {}) {
    UniquenessReport r;
    // The growth half of H2 is an integrability condition that every
    // driver meets on a finite lattice; continuity is what matters here.
    r.in_class = g.declares(AssumptionClass::H1i) && g.declares(AssumptionClass::H2i);
    try {
        const auto base = solve_drbsde(lattice, xi, g, V, barriers, cfg.numerics);
        for (double d : cfg.dampings) {
            NumericsConfig num = cfg.numerics;
            num.damping = d;
            r.direct_deviation = std::max(r.direct_deviation,
                                          detail::relative_gap(base.Y, solve_drbsde(lattice, xi, g, V, barriers, num).Y));
        }
        for (double off : cfg.offsets) {
            NumericsConfig num = cfg.numerics;
            num.start_offset = off;
            r.direct_deviation = std::max(r.direct_deviation,
                                          detail::relative_gap(base.Y, solve_drbsde(lattice, xi, g, V, barriers, num).Y));
        }
        if (cfg.ladders && (barriers.lower.present() || barriers.upper.present())) {
            LadderConfig lc;
            lc.numerics = cfg.numerics;
            lc.throw_on_violation = false;
            r.ladders_run = true;
            if (barriers.lower.present() && barriers.upper.present()) {
                const auto up = penalization_ladder_mixed(lattice, xi, g, V, barriers, cfg.ladder_schedule,
                                                          MixedVariant::via_upper_rbsde, lc);
                const auto down = penalization_ladder_mixed(lattice, xi, g, V, barriers, cfg.ladder_schedule,
                                                            MixedVariant::via_lower_rbsde, lc);
                r.ladder_deviation = norms::sup_node_gap(up.limit().Y, down.limit().Y);
            } else if (barriers.lower.present()) {
                const auto l = penalization_ladder_lower(lattice, xi, g, V, barriers.lower, cfg.ladder_schedule, lc);
                r.ladder_deviation = norms::sup_node_gap(l.limit().Y, base.Y);
            } else {
                const auto u = penalization_ladder_upper(lattice, xi, g, V, barriers.upper, cfg.ladder_schedule, lc);
                r.ladder_deviation = norms::sup_node_gap(u.limit().Y, base.Y);
            }
        }
    } catch (const Error& e) {
        r.note = e.what();
        r.verdict = r.in_class ? Verdict::fail : Verdict::inconclusive;
        return r;
    }
    if (!r.in_class) {
        r.verdict = Verdict::inconclusive;
        r.note = "driver does not declare H1(i) and H2(i); deviations reported only";
        return r;
    }
    const bool direct_ok = r.direct_deviation <= 10.0 * cfg.numerics.tol;
    const bool ladder_ok = !r.ladders_run || r.ladder_deviation <= cfg.ladder_tol;
    r.verdict = direct_ok && ladder_ok ? Verdict::pass : Verdict::fail;
    return r;
}

// Approximation battery -----------------------------------------------------

enum class SequenceDirection { nondecreasing, nonincreasing };
using GeneratorSequence = std::function<GeneratorSpec(double n)>;

struct ApproximationConfig {
    NumericsConfig numerics;
    NormConfig norms;
    double stiff_threshold = 0.5;
    double monotone_tol = 1e-6;
    bool contraction_check = false;
    bool throw_on_violation = true;
};

struct ApproximationReport {
    SequenceDirection direction = SequenceDirection::nondecreasing;
    /// gaps are measured against the reference solution when one is given,
    /// otherwise against the last entry.
    std::vector<LadderEntry> entries;
    bool reference_given = false;
    std::size_t y_violations = 0;
    std::size_t k_violations = 0;
    std::size_t a_violations = 0;
    double worst_y = 0.0;
    double worst_k = 0.0;
    double worst_a = 0.0;
    bool gaps_nonincreasing = true;
    /// Distances between the last two entries.
    GapNorms final_gaps;
};

/// g_n from infimal (nondecreasing) or supremal (nonincreasing) convolution.
inline GeneratorSequence convolution_sequence(const GeneratorSpec& g1, const GeneratorSpec& g2, ConvolutionDirection dir,
                                              const SearchConfig& search = ConvolutionConfig{}.search) {
    return [g1, g2, dir, search](double n) { return regularized_driver(g1, g2, n, dir, search); };
}

/**
 * Solves the reflected problem for every g_n. A nondecreasing sequence must
 * give Y^n nondecreasing, dK^n nonincreasing and dA^n nondecreasing; the
 * other direction flips all three.
 */
inline ApproximationReport approximation_battery(const BrownianLattice& lattice, const std::vector<double>& xi,
                                                 const ForcingTerm& V, const BarrierPair& barriers,
                                                 const GeneratorSequence& sequence, SequenceDirection direction,
                                                 const std::vector<double>& schedule,
                                                 const ApproximationConfig& cfg = {},
                                                 const GeneratorSpec* reference = nullptr) {
    detail::check_schedule(schedule);
    ApproximationReport r;
    r.direction = direction;
    auto numerics_for = [&](const GeneratorSpec& g) {
        NumericsConfig num = cfg.numerics;
        num.enforce_contraction = cfg.contraction_check;
        if (g.params().linear_growth.value_or(0.0) * lattice.dt() >= cfg.stiff_threshold) {
            num.force_bracketing = true;
        }
        return num;
    };
    auto solve = [&](const GeneratorSpec& g) {
        return detail::backward_lattice(lattice, xi, g, V, barriers.lower, barriers.upper, numerics_for(g));
    };
    for (double n : schedule) {
        LadderEntry e;
        e.n = n;
        e.solution = solve(sequence(n));
        e.k_total = detail::expected_total(lattice, e.solution.dK);
        e.a_total = detail::expected_total(lattice, e.solution.dA);
        r.entries.push_back(std::move(e));
    }
    const auto up = direction == SequenceDirection::nondecreasing ? detail::Direction::up : detail::Direction::down;
    const auto down = up == detail::Direction::up ? detail::Direction::down : detail::Direction::up;
    for (std::size_t j = 1; j < r.entries.size(); ++j) {
        const auto& a = r.entries[j - 1].solution;
        const auto& b = r.entries[j].solution;
        detail::count_direction(a.Y, b.Y, up, cfg.monotone_tol, r.y_violations, r.worst_y);
        detail::count_direction(a.dK, b.dK, down, cfg.monotone_tol, r.k_violations, r.worst_k);
        detail::count_direction(a.dA, b.dA, up, cfg.monotone_tol, r.a_violations, r.worst_a);
    }
    const auto paths = PathSet::for_lattice(lattice, cfg.norms.path_samples, cfg.norms.seed);
    SolutionQuadruple ref;
    if (reference != nullptr) {
        r.reference_given = true;
        ref = solve(*reference);
    } else {
        ref = r.entries.back().solution;
    }
    for (auto& e : r.entries) {
        e.gaps = detail::gap_norms(lattice, e.solution, ref, paths, cfg.norms.beta);
    }
    if (r.entries.size() >= 2) {
        r.final_gaps = detail::gap_norms(lattice, r.entries.back().solution, r.entries[r.entries.size() - 2].solution,
                                         paths, cfg.norms.beta);
    }
    // Against the last entry the final gap is zero by construction; only
    // the entries before it say anything about the trend.
    if (reference != nullptr) {
        r.gaps_nonincreasing = detail::last_three_nonincreasing(r.entries);
    } else if (r.entries.size() >= 2) {
        std::vector<LadderEntry> head(r.entries.begin(), r.entries.end() - 1);
        r.gaps_nonincreasing = detail::last_three_nonincreasing(head);
    }
    if (cfg.throw_on_violation && r.y_violations + r.k_violations + r.a_violations > 0) {
        throw Error(ErrorCode::monotonicity_violation,
                    "approximation sequence moved against its direction at " +
                        std::to_string(r.y_violations + r.k_violations + r.a_violations) + " nodes (worst Y " +
                        sci(r.worst_y) + ", dK " + sci(r.worst_k) + ", dA " + sci(r.worst_a) + ")");
    }
    return r;
}

} // namespace l1bsde
