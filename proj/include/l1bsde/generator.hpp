#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "l1bsde/error.hpp"
#include "l1bsde/expression.hpp"

namespace l1bsde {

/// Where a driver is evaluated: time, model coordinates and Brownian state.
struct EvalPoint {
    double t = 0.0;
    std::size_t step = 0;
    std::size_t node = 0;
    std::span<const double> state;
};

/// Owning copy of an EvalPoint plus a z vector, for closures that outlive the caller's buffers.
class BoundPoint {
public:
    BoundPoint(const EvalPoint& p, std::span<const double> z)
        : t_(p.t), step_(p.step), node_(p.node), state_(p.state.begin(), p.state.end()), z_(z.begin(), z.end()) {}

    EvalPoint point() const { return EvalPoint{t_, step_, node_, state_}; }
    std::span<const double> z() const { return z_; }

private:
    double t_;
    std::size_t step_;
    std::size_t node_;
    std::vector<double> state_;
    std::vector<double> z_;
};

using Driver = std::function<double(const EvalPoint&, double y, std::span<const double> z)>;
/// g(t, state, ., z) with everything but y frozen.
using YSlice = std::function<double(double)>;
using Slicer = std::function<YSlice(const EvalPoint&, std::span<const double> z)>;
using PointFunction = std::function<double(const EvalPoint&)>;
using Envelope = std::function<double(const EvalPoint&, double r)>;
using Modulus = std::function<double(double)>;

enum class AssumptionClass { H1i, H1ii, H1iii, H2i, H2ii, H2prime, HH, AA };

inline const char* to_string(AssumptionClass c) {
    switch (c) {
    case AssumptionClass::H1i: return "H1i";
    case AssumptionClass::H1ii: return "H1ii";
    case AssumptionClass::H1iii: return "H1iii";
    case AssumptionClass::H2i: return "H2i";
    case AssumptionClass::H2ii: return "H2ii";
    case AssumptionClass::H2prime: return "H2prime";
    case AssumptionClass::HH: return "HH";
    case AssumptionClass::AA: return "AA";
    }
    return "?";
}

inline std::optional<AssumptionClass> assumption_from_string(std::string_view s) {
    for (auto c : {AssumptionClass::H1i, AssumptionClass::H1ii, AssumptionClass::H1iii, AssumptionClass::H2i,
                   AssumptionClass::H2ii, AssumptionClass::H2prime, AssumptionClass::HH, AssumptionClass::AA}) {
        if (s == to_string(c)) {
            return c;
        }
    }
    return std::nullopt;
}

/// Expands the shorthands "H1" and "H2" into their parts.
inline std::set<AssumptionClass> expand_classes(const std::vector<std::string>& names) {
    std::set<AssumptionClass> out;
    for (const auto& n : names) {
        if (n == "H1") {
            out.insert({AssumptionClass::H1i, AssumptionClass::H1ii, AssumptionClass::H1iii});
        } else if (n == "H2") {
            out.insert({AssumptionClass::H2i, AssumptionClass::H2ii});
        } else if (auto c = assumption_from_string(n)) {
            out.insert(*c);
        } else {
            throw Error(ErrorCode::validation_error, "unknown assumption class '" + n + "'");
        }
    }
    return out;
}

/**
 * Parameters attached to the assumption classes a driver declares.
 *
 * rho: one-sided Osgood modulus in y. phi: continuity modulus in z.
 * gamma, alpha, f: stronger sub-linear growth in z; mu, lambda, alpha, f for
 * the weaker variant and (HH). The tilde family belongs to (AA). psi is the
 * general-growth envelope sup_{|y|<=r} |g(y,0) - g(0,0)|, varphi the (HH)
 * envelope. linear_growth is the constant A with rho(x) <= A (x + 1); the
 * implicit solver requires A dt < 1.
 */
struct GeneratorParams {
    Modulus rho;
    Modulus phi;
    std::optional<double> gamma;
    std::optional<double> alpha;
    std::optional<double> mu;
    std::optional<double> lambda;
    std::optional<double> mu_tilde;
    std::optional<double> lambda_tilde;
    std::optional<double> alpha_tilde;
    PointFunction f;
    PointFunction f_tilde;
    Envelope psi;
    Envelope varphi;
    std::optional<double> linear_growth;
};

class GeneratorSpec {
public:
    GeneratorSpec() = default;

    GeneratorSpec(std::string id, Driver eval, std::set<AssumptionClass> declared = {}, GeneratorParams params = {})
        : id_(std::move(id)), eval_(std::move(eval)), declared_(std::move(declared)), params_(std::move(params)) {}

    const std::string& id() const noexcept { return id_; }
    void set_id(std::string id) { id_ = std::move(id); }
    const std::string& description() const noexcept { return description_; }
    void set_description(std::string d) { description_ = std::move(d); }

    double operator()(const EvalPoint& p, double y, std::span<const double> z) const { return eval_(p, y, z); }

    /// Driver restricted to a fixed (point, z); regularized drivers override
    /// this to precompute whatever does not depend on y.
    YSlice slice(const EvalPoint& p, std::span<const double> z) const {
        if (slicer_) {
            return slicer_(p, z);
        }
        return [bound = BoundPoint(p, z), eval = eval_](double y) { return eval(bound.point(), y, bound.z()); };
    }

    void set_slicer(Slicer s) { slicer_ = std::move(s); }

    const Driver& driver() const noexcept { return eval_; }
    const std::set<AssumptionClass>& declared() const noexcept { return declared_; }
    std::set<AssumptionClass>& declared() noexcept { return declared_; }
    bool declares(AssumptionClass c) const { return declared_.count(c) != 0; }

    const GeneratorParams& params() const noexcept { return params_; }
    GeneratorParams& params() noexcept { return params_; }

    explicit operator bool() const noexcept { return static_cast<bool>(eval_); }

private:
    std::string id_;
    std::string description_;
    Driver eval_;
    Slicer slicer_;
    std::set<AssumptionClass> declared_;
    GeneratorParams params_;
};

inline GeneratorSpec zero_generator() {
    GeneratorParams p;
    p.rho = [](double) { return 0.0; };
    p.phi = [](double) { return 0.0; };
    p.linear_growth = 0.0;
    p.gamma = 0.0;
    p.alpha = 0.5;
    p.f = [](const EvalPoint&) { return 0.0; };
    return GeneratorSpec(
        "zero", [](const EvalPoint&, double, std::span<const double>) { return 0.0; },
        {AssumptionClass::H1i, AssumptionClass::H1ii, AssumptionClass::H1iii, AssumptionClass::H2i,
         AssumptionClass::H2ii},
        std::move(p));
}

/// g = a y + b . z + c, Lipschitz with constant max(|a|, |b|).
inline GeneratorSpec affine_generator(double a, std::vector<double> b = {}, double c = 0.0) {
    double bn = 0.0;
    for (double v : b) {
        bn += v * v;
    }
    bn = std::sqrt(bn);
    GeneratorParams p;
    p.rho = [a](double x) { return std::max(a, 0.0) * x; };
    p.phi = [bn](double x) { return bn * x; };
    p.linear_growth = std::max(a, 0.0);
    auto eval = [a, b = std::move(b), c](const EvalPoint&, double y, std::span<const double> z) {
        double s = a * y + c;
        for (std::size_t i = 0; i < b.size() && i < z.size(); ++i) {
            s += b[i] * z[i];
        }
        return s;
    };
    return GeneratorSpec("affine", std::move(eval), {AssumptionClass::H1i, AssumptionClass::H2i}, std::move(p));
}

/// Driver given by an Expression over (t, T, y, z, B).
inline GeneratorSpec expression_generator(const Expression& expr, double horizon, std::set<AssumptionClass> declared = {},
                                          GeneratorParams params = {}) {
    auto eval = [expr, horizon](const EvalPoint& p, double y, std::span<const double> z) {
        return expr(ExprContext{p.t, horizon, y, z, p.state});
    };
    GeneratorSpec g("expr", std::move(eval), std::move(declared), std::move(params));
    g.set_description(expr.source());
    return g;
}

/// Pointwise sum; parameters are not combined (declared classes are dropped).
inline GeneratorSpec sum_generator(const GeneratorSpec& a, const GeneratorSpec& b) {
    GeneratorSpec g(a.id() + "+" + b.id(),
                    [a, b](const EvalPoint& p, double y, std::span<const double> z) { return a(p, y, z) + b(p, y, z); });
    g.set_slicer([a, b](const EvalPoint& p, std::span<const double> z) -> YSlice {
        return [sa = a.slice(p, z), sb = b.slice(p, z)](double y) { return sa(y) + sb(y); };
    });
    if (a.params().linear_growth && b.params().linear_growth) {
        g.params().linear_growth = *a.params().linear_growth + *b.params().linear_growth;
    }
    return g;
}

/// g~(t, y, z) = -g(t, -y, -z): the driver of the negated problem.
inline GeneratorSpec mirrored_generator(const GeneratorSpec& g) {
    GeneratorSpec m(g.id() + "~", [g](const EvalPoint& p, double y, std::span<const double> z) {
        std::vector<double> nz(z.begin(), z.end());
        for (double& v : nz) {
            v = -v;
        }
        return -g(p, -y, nz);
    });
    m.params().linear_growth = g.params().linear_growth;
    return m;
}

} // namespace l1bsde
