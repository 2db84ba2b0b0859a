#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "l1bsde/generator.hpp"
#include "l1bsde/moduli.hpp"

namespace l1bsde {

struct CatalogEntry {
    GeneratorSpec spec;
    /// Human-readable parameter summary for listings.
    std::string parameters;
};

namespace detail {

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

inline double inv_root_time(double t, double root) { return t > 0.0 ? std::pow(t, -1.0 / root) : 0.0; }

inline GeneratorSpec ex71() {
    auto eval = [](const EvalPoint& p, double y, std::span<const double> z) {
        const double b2 = norm2(p.state);
        const double zn = std::sqrt(norm2(z));
        return moduli::h(std::fabs(y)) + std::exp(-y * b2) + std::min(std::exp(-y), 1.0) * (std::sqrt(zn) + std::cbrt(zn)) +
               inv_root_time(p.t, 2.0);
    };
    GeneratorParams q;
    q.rho = moduli::h;
    q.linear_growth = 1.0;
    q.phi = [](double x) { return std::sqrt(x) + std::cbrt(x); };
    q.gamma = 2.0;
    q.alpha = 0.5;
    q.f = [](const EvalPoint&) { return 1.0; };
    q.psi = [](const EvalPoint& p, double r) {
        return moduli::h_at_delta() + moduli::h_slope_at_delta() * r + std::exp(r * norm2(p.state)) + 1.0;
    };
    GeneratorSpec g("ex7.1", eval, expand_classes({"H1", "H2"}), std::move(q));
    g.set_slicer([](const EvalPoint& p, std::span<const double> z) -> YSlice {
        const double b2 = norm2(p.state);
        const double zn = std::sqrt(norm2(z));
        const double zpart = std::sqrt(zn) + std::cbrt(zn);
        const double tpart = inv_root_time(p.t, 2.0);
        return [=](double y) {
            return moduli::h(std::fabs(y)) + std::exp(-y * b2) + std::min(std::exp(-y), 1.0) * zpart + tpart;
        };
    });
    g.set_description("h(|y|) + exp(-y|B|^2) + min(exp(-y),1)(sqrt|z| + cbrt|z|) + t^(-1/2) 1{t>0}");
    return g;
}

inline GeneratorSpec ex72_g1() {
    auto eval = [](const EvalPoint& p, double y, std::span<const double> z) {
        const double b2 = norm2(p.state);
        const double zn = std::sqrt(norm2(z));
        const double s = std::sin(zn);
        return moduli::h(std::fabs(y)) - y * y * y * std::exp(b2 * b2) - std::exp(y) * s * s +
               std::sqrt(zn) * std::cos(zn) + inv_root_time(p.t, 3.0);
    };
    GeneratorParams q;
    q.rho = moduli::h;
    q.linear_growth = 1.0;
    q.lambda = 1.0;
    q.alpha = 0.5;
    q.f = [](const EvalPoint& p) { return 1.0 + inv_root_time(p.t, 3.0) + moduli::h_at_delta(); };
    q.varphi = [](const EvalPoint& p, double r) {
        const double b2 = norm2(p.state);
        return moduli::h_slope_at_delta() * r + r * r * r * std::exp(b2 * b2) + std::exp(r) - 1.0;
    };
    GeneratorSpec g("ex7.2.g1", eval, {AssumptionClass::H1i, AssumptionClass::HH}, std::move(q));
    g.set_slicer([](const EvalPoint& p, std::span<const double> z) -> YSlice {
        const double b2 = norm2(p.state);
        const double zn = std::sqrt(norm2(z));
        const double s2 = std::sin(zn) * std::sin(zn);
        const double w = std::exp(b2 * b2);
        const double rest = std::sqrt(zn) * std::cos(zn) + inv_root_time(p.t, 3.0);
        return [=](double y) { return moduli::h(std::fabs(y)) - y * y * y * w - std::exp(y) * s2 + rest; };
    });
    g.set_description("h(|y|) - y^3 exp(|B|^4) - exp(y) sin^2|z| + sqrt|z| cos|z| + t^(-1/3) 1{t>0}");
    return g;
}

inline GeneratorSpec ex72_g2() {
    auto eval = [](const EvalPoint& p, double y, std::span<const double> z) {
        const double zn = std::sqrt(norm2(z));
        return std::cbrt(std::fabs(y)) + y * std::cos(y) + std::pow(std::fabs(y) * zn, 0.25) + std::sqrt(norm2(p.state));
    };
    GeneratorParams q;
    q.f_tilde = [](const EvalPoint& p) { return std::sqrt(norm2(p.state)) + 2.0; };
    q.mu_tilde = 3.0;
    q.lambda_tilde = 1.0;
    q.alpha_tilde = 0.5;
    GeneratorSpec g("ex7.2.g2", eval, {AssumptionClass::AA}, std::move(q));
    g.set_description("cbrt|y| + y cos y + (|y||z|)^(1/4) + |B|");
    return g;
}

inline GeneratorSpec ex73_g1() {
    auto eval = [](const EvalPoint& p, double y, std::span<const double> z) {
        const double b3 = std::pow(norm2(p.state), 1.5);
        const double zn = std::sqrt(norm2(z));
        return moduli::hbar(std::fabs(y)) - std::exp(y * b3) + std::min(std::exp(-y), 1.0) * std::sqrt(zn) * std::cos(zn) +
               inv_root_time(p.t, 4.0);
    };
    GeneratorParams q;
    q.rho = moduli::hbar;
    q.linear_growth = moduli::hbar_slope_at_delta();
    q.f = [](const EvalPoint&) { return 0.0; };
    q.mu = 0.0;
    q.lambda = 1.0;
    q.alpha = 0.5;
    q.psi = [](const EvalPoint& p, double r) {
        return moduli::hbar_at_delta() + moduli::hbar_slope_at_delta() * r + std::exp(r * std::pow(norm2(p.state), 1.5)) +
               1.0;
    };
    auto declared = expand_classes({"H1"});
    declared.insert(AssumptionClass::H2prime);
    GeneratorSpec g("ex7.3.g1", eval, std::move(declared), std::move(q));
    g.set_slicer([](const EvalPoint& p, std::span<const double> z) -> YSlice {
        const double b3 = std::pow(norm2(p.state), 1.5);
        const double zn = std::sqrt(norm2(z));
        const double zpart = std::sqrt(zn) * std::cos(zn);
        const double tpart = inv_root_time(p.t, 4.0);
        return [=](double y) {
            return moduli::hbar(std::fabs(y)) - std::exp(y * b3) + std::min(std::exp(-y), 1.0) * zpart + tpart;
        };
    });
    g.set_description("hbar(|y|) - exp(y|B|^3) + min(exp(-y),1) sqrt|z| cos|z| + t^(-1/4) 1{t>0}");
    return g;
}

inline GeneratorSpec ex73_g2() {
    auto eval = [](const EvalPoint& p, double y, std::span<const double> z) {
        const double zn = std::sqrt(norm2(z));
        return y * std::cos(zn) + std::cbrt(zn) * std::sin(y) + std::sqrt(1.0 + std::fabs(y) + zn) + norm2(p.state);
    };
    GeneratorParams q;
    q.f_tilde = [](const EvalPoint& p) { return norm2(p.state) + 2.0; };
    q.mu_tilde = 2.0;
    q.lambda_tilde = 2.0;
    q.alpha_tilde = 0.5;
    GeneratorSpec g("ex7.3.g2", eval, {AssumptionClass::AA}, std::move(q));
    g.set_description("y cos|z| + cbrt|z| sin y + sqrt(1 + |y| + |z|) + |B|^2");
    return g;
}

inline std::string describe_params(const GeneratorSpec& g) {
    const auto& q = g.params();
    std::string out;
    auto add = [&](const std::string& name, const std::optional<double>& v) {
        if (v) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s=%.6g", name.c_str(), *v);
            out += (out.empty() ? "" : " ") + std::string(buf);
        }
    };
    add("A", q.linear_growth);
    add("gamma", q.gamma);
    add("mu", q.mu);
    add("lambda", q.lambda);
    add("alpha", q.alpha);
    add("mu~", q.mu_tilde);
    add("lambda~", q.lambda_tilde);
    add("alpha~", q.alpha_tilde);
    return out;
}

} // namespace detail

/// The worked examples: ex7.1, and the two parts of ex7.2 and ex7.3.
inline std::vector<CatalogEntry> catalog() {
    std::vector<CatalogEntry> out;
    for (auto g : {detail::ex71(), detail::ex72_g1(), detail::ex72_g2(), detail::ex73_g1(), detail::ex73_g2()}) {
        std::string params = detail::describe_params(g);
        if (g.id() == "ex7.1") {
            params += " rho=h phi=sqrt+cbrt f=1";
        } else if (g.id() == "ex7.2.g1") {
            params += " rho=h f=1+t^(-1/3)+h(delta)";
        } else if (g.id() == "ex7.2.g2") {
            params += " f~=|B|+2";
        } else if (g.id() == "ex7.3.g1") {
            params += " rho=hbar f=0";
        } else {
            params += " f~=|B|^2+2";
        }
        out.push_back(CatalogEntry{std::move(g), std::move(params)});
    }
    return out;
}

inline std::optional<GeneratorSpec> find_catalog(const std::string& id) {
    for (auto& e : catalog()) {
        if (e.spec.id() == id) {
            return e.spec;
        }
    }
    return std::nullopt;
}

/// Entries whose id contains `filter` (all entries for an empty filter).
inline std::vector<CatalogEntry> list_catalog(const std::string& filter = "") {
    std::vector<CatalogEntry> out;
    for (auto& e : catalog()) {
        if (filter.empty() || e.spec.id().find(filter) != std::string::npos) {
            out.push_back(std::move(e));
        }
    }
    return out;
}

/// The (g1, g2) split of a two-part example ("ex7.2" or "ex7.3").
inline std::optional<std::pair<GeneratorSpec, GeneratorSpec>> catalog_split(const std::string& id) {
    auto a = find_catalog(id + ".g1");
    auto b = find_catalog(id + ".g2");
    if (!a || !b) {
        return std::nullopt;
    }
    return std::make_pair(*a, *b);
}

} // namespace l1bsde
