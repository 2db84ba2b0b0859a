#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "l1bsde/catalog.hpp"
#include "l1bsde/error.hpp"
#include "l1bsde/expression.hpp"

namespace l1bsde {

/*
 * Experiment manifests are JSON objects with "version": 1. Every block is
 * optional except model, data and scheme; absent keys take the defaults
 * below and unknown keys are rejected. Expressions use the generator
 * grammar; "none" switches a barrier or forcing term off.
 *
 *   {
 *     "version": 1, "name": "snell_penalization",
 *     "model": {"T": 1, "n_steps": 32, "d": 1, "backend": "lattice"},
 *     "data": {"xi": "B^2", "L": "0.5", "clip_terminal_barriers": true},
 *     "generator": {"catalog": "zero"},
 *     "scheme": {"kind": "ladder", "variant": "lower"},
 *     "schedule": [1, 4, 16, 64, 256, 1024],
 *     "expect": [{"metric": "ladder.violations", "op": "==", "value": 0}]
 *   }
 */

inline constexpr int manifest_version = 1;

struct ModelBlock {
    double horizon = 1.0;
    std::size_t n_steps = 0;
    std::size_t dim = 1;
    std::string backend = "lattice";
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    bool operator==(const ModelBlock&) const = default;
};

struct DataBlock {
    std::string xi;
    /// Rate v(t, B); dV = v dt.
    std::string V = "none";
    std::string L = "none";
    std::string U = "none";
    /// Replace L_T by min(L_T, xi) and U_T by max(U_T, xi).
    bool clip_terminal_barriers = false;
    bool operator==(const DataBlock&) const = default;
};

struct GeneratorBlock {
    /// A catalog id, "zero", or "ex7.2" / "ex7.3" for the summed split.
    std::string catalog;
    std::string expr;
    std::vector<std::string> declared;
    std::optional<double> linear_growth;
    /// Two catalog ids (g1, g2) for convolution schemes.
    std::vector<std::string> split;
    bool operator==(const GeneratorBlock&) const = default;
};

struct SchemeBlock {
    /// direct | ladder | convolution | battery
    std::string kind = "direct";
    /// Ladder: lower | upper | double | via_upper_rbsde | via_lower_rbsde | via_bsde.
    std::string variant;
    /// Battery: comparison | uniqueness | mokobodzki | approximation.
    std::string battery;
    /// Convolution and approximation: minimal | maximal.
    std::string direction = "minimal";
    /// Comparison battery case count and seed.
    std::size_t cases = 200;
    std::uint64_t case_seed = 7;
    bool operator==(const SchemeBlock&) const = default;
};

struct NumericsBlock {
    double tol = 1e-12;
    std::size_t max_iter = 200;
    double beta = 0.5;
    std::size_t threads = 1;
    /// Monte Carlo regression degree.
    std::size_t degree = 2;
    bool operator==(const NumericsBlock&) const = default;
};

struct OutputsBlock {
    std::string directory;
    std::vector<std::string> formats{"csv", "json"};
    bool operator==(const OutputsBlock&) const = default;
};

/// Assertion on a scalar result: metric op value (with tol for "==").
struct Expectation {
    std::string metric;
    std::string op;
    double value = 0.0;
    double tol = 0.0;
    bool operator==(const Expectation&) const = default;
};

struct ExperimentManifest {
    int version = manifest_version;
    std::string name;
    ModelBlock model;
    DataBlock data;
    GeneratorBlock generator;
    SchemeBlock scheme;
    std::vector<double> schedule;
    NumericsBlock numerics;
    OutputsBlock outputs;
    std::vector<Expectation> expect;
    bool operator==(const ExperimentManifest&) const = default;
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void invalid(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::validation_error, where + ": " + what);
}

inline void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) {
        invalid(where, "expected an object");
    }
    for (const auto& [k, v] : obj.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; })) {
            invalid(where + "." + k, "unknown key");
        }
    }
}

template <class T>
T field(const json& obj, const std::string& where, const char* key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        invalid(where + "." + key, "has the wrong type");
    }
}

template <class T>
T required(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        invalid(where + "." + key, "is required");
    }
    return field<T>(obj, where, key, T{});
}

inline std::size_t count_field(const json& obj, const std::string& where, const char* key, std::size_t fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        invalid(where + "." + key, "must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

/// Parses an expression field, reporting the grammar error with the field name.
inline void check_expression(const std::string& text, const std::string& where, bool allow_none,
                             std::initializer_list<const char*> forbidden) {
    if (allow_none && text == "none") {
        return;
    }
    try {
        const auto e = Expression::parse(text);
        for (const char* f : forbidden) {
            if (e.uses(f)) {
                invalid(where, std::string("may not use ") + f);
            }
        }
    } catch (const ParseError& err) {
        invalid(where, err.what());
    }
}

inline bool known_generator(const std::string& id) {
    return id == "zero" || find_catalog(id).has_value() || catalog_split(id).has_value();
}

inline const std::set<std::string>& assumption_names() {
    static const std::set<std::string> names{"H1i", "H1ii", "H1iii", "H2i", "H2ii", "H2prime", "HH", "AA"};
    return names;
}

} // namespace detail

/// Checks cross-field invariants; throws validation_error naming the field.
inline void validate(const ExperimentManifest& m) {
    using detail::invalid;
    if (m.version != manifest_version) {
        invalid("version", "unsupported manifest version " + std::to_string(m.version));
    }
    if (m.name.empty()) {
        invalid("name", "is required");
    }
    for (char c : m.name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
            invalid("name", "may only contain letters, digits, '_', '-' and '.'");
        }
    }
    const auto& md = m.model;
    if (!(md.horizon > 0.0) || !std::isfinite(md.horizon)) {
        invalid("model.T", "must be positive");
    }
    if (md.n_steps == 0) {
        invalid("model.n_steps", "must be >= 1");
    }
    if (md.dim == 0) {
        invalid("model.d", "must be >= 1");
    }
    if (md.backend == "lattice") {
        if (md.dim > 2) {
            invalid("model.d", "the lattice backend supports d <= 2; use backend mc");
        }
    } else if (md.backend == "mc") {
        if (!md.seed) {
            invalid("model.seed", "is required for the mc backend");
        }
        if (!md.paths || *md.paths < 2) {
            invalid("model.M", "the mc backend needs M >= 2 paths");
        }
        if (m.scheme.kind != "direct") {
            invalid("scheme.kind", "the mc backend runs the direct scheme only");
        }
        if (m.data.L != "none" || m.data.U != "none") {
            invalid("data", "the mc backend solves non-reflected problems only");
        }
    } else {
        invalid("model.backend", "must be lattice or mc");
    }
    const bool battery_without_data = m.scheme.kind == "battery" && m.scheme.battery == "comparison";
    if (m.data.xi.empty() && !battery_without_data) {
        invalid("data.xi", "is required");
    }
    if (!m.data.xi.empty()) {
        detail::check_expression(m.data.xi, "data.xi", false, {"y", "z"});
    }
    detail::check_expression(m.data.V, "data.V", true, {"y", "z"});
    detail::check_expression(m.data.L, "data.L", true, {"y", "z"});
    detail::check_expression(m.data.U, "data.U", true, {"y", "z"});

    const auto& g = m.generator;
    const int sources = static_cast<int>(!g.catalog.empty()) + static_cast<int>(!g.expr.empty()) +
                        static_cast<int>(!g.split.empty());
    if (sources > 1) {
        invalid("generator", "give exactly one of catalog, expr or split");
    }
    if (!g.catalog.empty() && !detail::known_generator(g.catalog)) {
        invalid("generator.catalog", "unknown catalog id '" + g.catalog + "'");
    }
    if (!g.expr.empty()) {
        detail::check_expression(g.expr, "generator.expr", false, {});
    }
    for (const auto& c : g.declared) {
        if (!detail::assumption_names().count(c)) {
            invalid("generator.declared", "unknown assumption class '" + c + "'");
        }
    }
    if (g.linear_growth && !(*g.linear_growth >= 0.0)) {
        invalid("generator.linear_growth", "must be nonnegative");
    }
    if (!g.split.empty()) {
        if (g.split.size() != 2) {
            invalid("generator.split", "needs exactly two catalog ids");
        }
        for (const auto& id : g.split) {
            if (!find_catalog(id)) {
                invalid("generator.split", "unknown catalog id '" + id + "'");
            }
        }
    }

    const auto& s = m.scheme;
    auto need_schedule = [&] {
        if (m.schedule.empty()) {
            invalid("schedule", "is required for scheme kind " + s.kind);
        }
    };
    if (s.kind == "direct") {
    } else if (s.kind == "ladder") {
        static const std::set<std::string> variants{"lower", "upper", "double", "via_upper_rbsde", "via_lower_rbsde",
                                                    "via_bsde"};
        if (!variants.count(s.variant)) {
            invalid("scheme.variant", "unknown ladder variant '" + s.variant + "'");
        }
        const bool need_l = s.variant != "upper";
        const bool need_u = s.variant != "lower";
        if (need_l && m.data.L == "none") {
            invalid("data.L", "ladder variant " + s.variant + " needs a lower barrier");
        }
        if (need_u && m.data.U == "none") {
            invalid("data.U", "ladder variant " + s.variant + " needs an upper barrier");
        }
        need_schedule();
    } else if (s.kind == "convolution") {
        if (g.split.empty() && !catalog_split(g.catalog)) {
            invalid("generator", "convolution needs a split generator (ex7.2, ex7.3 or split ids)");
        }
        need_schedule();
    } else if (s.kind == "battery") {
        static const std::set<std::string> batteries{"comparison", "uniqueness", "mokobodzki", "approximation"};
        if (!batteries.count(s.battery)) {
            invalid("scheme.battery", "unknown battery '" + s.battery + "'");
        }
        if (s.battery == "approximation") {
            if (g.split.empty() && !catalog_split(g.catalog)) {
                invalid("generator", "the approximation battery needs a split generator");
            }
            need_schedule();
        }
        if (s.battery == "comparison" && s.cases == 0) {
            invalid("scheme.cases", "must be >= 1");
        }
    } else {
        invalid("scheme.kind", "must be direct, ladder, convolution or battery");
    }
    if (s.direction != "minimal" && s.direction != "maximal") {
        invalid("scheme.direction", "must be minimal or maximal");
    }
    for (std::size_t i = 0; i < m.schedule.size(); ++i) {
        if (!(m.schedule[i] > 0.0) || !std::isfinite(m.schedule[i])) {
            invalid("schedule[" + std::to_string(i) + "]", "must be positive");
        }
        if (i > 0 && !(m.schedule[i] > m.schedule[i - 1])) {
            invalid("schedule[" + std::to_string(i) + "]", "schedule must be strictly increasing");
        }
    }
    const auto& nm = m.numerics;
    if (!(nm.tol > 0.0)) {
        invalid("numerics.tol", "must be positive");
    }
    if (nm.max_iter == 0) {
        invalid("numerics.max_iter", "must be >= 1");
    }
    if (!(nm.beta > 0.0 && nm.beta < 1.0)) {
        invalid("numerics.beta", "must lie in (0, 1)");
    }
    for (const auto& f : m.outputs.formats) {
        if (f != "csv" && f != "json") {
            invalid("outputs.formats", "unknown format '" + f + "'");
        }
    }
    static const std::set<std::string> ops{"<=", ">=", "<", ">", "=="};
    for (std::size_t i = 0; i < m.expect.size(); ++i) {
        const auto& e = m.expect[i];
        const std::string where = "expect[" + std::to_string(i) + "]";
        if (e.metric.empty()) {
            invalid(where + ".metric", "is required");
        }
        if (!ops.count(e.op)) {
            invalid(where + ".op", "must be one of <=, >=, <, >, ==");
        }
        if (!(e.tol >= 0.0)) {
            invalid(where + ".tol", "must be nonnegative");
        }
    }
}

/// Parses and validates. Syntax errors carry the byte offset.
inline ExperimentManifest parse_manifest(const std::string& text) {
    using detail::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.byte, e.what());
    }
    detail::allow_keys(j, "manifest",
                       {"version", "name", "model", "data", "generator", "scheme", "schedule", "numerics", "outputs",
                        "expect"});
    ExperimentManifest m;
    if (!j.contains("version")) {
        detail::invalid("version", "is required");
    }
    m.version = detail::field<int>(j, "manifest", "version", 0);
    m.name = detail::required<std::string>(j, "manifest", "name");
    if (!j.contains("model")) {
        detail::invalid("model", "is required");
    }
    const auto& mo = j.at("model");
    detail::allow_keys(mo, "model", {"T", "n_steps", "d", "backend", "M", "seed"});
    m.model.horizon = detail::field<double>(mo, "model", "T", 1.0);
    m.model.n_steps = detail::count_field(mo, "model", "n_steps", 0);
    m.model.dim = detail::count_field(mo, "model", "d", 1);
    m.model.backend = detail::field<std::string>(mo, "model", "backend", "lattice");
    if (mo.contains("M") && !mo.at("M").is_null()) {
        m.model.paths = detail::count_field(mo, "model", "M", 0);
    }
    if (mo.contains("seed") && !mo.at("seed").is_null()) {
        m.model.seed = detail::count_field(mo, "model", "seed", 0);
    }
    if (!j.contains("data")) {
        detail::invalid("data", "is required");
    }
    const auto& da = j.at("data");
    detail::allow_keys(da, "data", {"xi", "V", "L", "U", "clip_terminal_barriers"});
    m.data.xi = detail::field<std::string>(da, "data", "xi", "");
    m.data.V = detail::field<std::string>(da, "data", "V", "none");
    m.data.L = detail::field<std::string>(da, "data", "L", "none");
    m.data.U = detail::field<std::string>(da, "data", "U", "none");
    m.data.clip_terminal_barriers = detail::field<bool>(da, "data", "clip_terminal_barriers", false);
    if (j.contains("generator")) {
        const auto& ge = j.at("generator");
        detail::allow_keys(ge, "generator", {"catalog", "expr", "declared", "linear_growth", "split"});
        m.generator.catalog = detail::field<std::string>(ge, "generator", "catalog", "");
        m.generator.expr = detail::field<std::string>(ge, "generator", "expr", "");
        m.generator.declared = detail::field<std::vector<std::string>>(ge, "generator", "declared", {});
        if (ge.contains("linear_growth") && !ge.at("linear_growth").is_null()) {
            m.generator.linear_growth = detail::field<double>(ge, "generator", "linear_growth", 0.0);
        }
        m.generator.split = detail::field<std::vector<std::string>>(ge, "generator", "split", {});
    }
    if (m.generator.catalog.empty() && m.generator.expr.empty() && m.generator.split.empty()) {
        m.generator.catalog = "zero";
    }
    if (!j.contains("scheme")) {
        detail::invalid("scheme", "is required");
    }
    const auto& sc = j.at("scheme");
    detail::allow_keys(sc, "scheme", {"kind", "variant", "battery", "direction", "cases", "case_seed"});
    m.scheme.kind = detail::required<std::string>(sc, "scheme", "kind");
    m.scheme.variant = detail::field<std::string>(sc, "scheme", "variant", "");
    m.scheme.battery = detail::field<std::string>(sc, "scheme", "battery", "");
    m.scheme.direction = detail::field<std::string>(sc, "scheme", "direction", "minimal");
    m.scheme.cases = detail::count_field(sc, "scheme", "cases", 200);
    m.scheme.case_seed = detail::count_field(sc, "scheme", "case_seed", 7);
    m.schedule = detail::field<std::vector<double>>(j, "manifest", "schedule", {});
    if (j.contains("numerics")) {
        const auto& nu = j.at("numerics");
        detail::allow_keys(nu, "numerics", {"tol", "max_iter", "beta", "threads", "degree"});
        m.numerics.tol = detail::field<double>(nu, "numerics", "tol", 1e-12);
        m.numerics.max_iter = detail::count_field(nu, "numerics", "max_iter", 200);
        m.numerics.beta = detail::field<double>(nu, "numerics", "beta", 0.5);
        m.numerics.threads = detail::count_field(nu, "numerics", "threads", 1);
        m.numerics.degree = detail::count_field(nu, "numerics", "degree", 2);
    }
    if (j.contains("outputs")) {
        const auto& ou = j.at("outputs");
        detail::allow_keys(ou, "outputs", {"directory", "formats"});
        m.outputs.directory = detail::field<std::string>(ou, "outputs", "directory", "");
        m.outputs.formats = detail::field<std::vector<std::string>>(ou, "outputs", "formats", {"csv", "json"});
    }
    if (j.contains("expect")) {
        const auto& ex = j.at("expect");
        if (!ex.is_array()) {
            detail::invalid("expect", "must be an array");
        }
        for (std::size_t i = 0; i < ex.size(); ++i) {
            const std::string where = "expect[" + std::to_string(i) + "]";
            detail::allow_keys(ex[i], where, {"metric", "op", "value", "tol"});
            Expectation e;
            e.metric = detail::required<std::string>(ex[i], where, "metric");
            e.op = detail::required<std::string>(ex[i], where, "op");
            e.value = detail::required<double>(ex[i], where, "value");
            e.tol = detail::field<double>(ex[i], where, "tol", 0.0);
            m.expect.push_back(std::move(e));
        }
    }
    validate(m);
    return m;
}

inline ExperimentManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::invalid_argument, "cannot read manifest '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

/// Canonical form: every field explicit, keys sorted, two-space indent.
inline std::string serialize_manifest(const ExperimentManifest& m) {
    using detail::json;
    json j;
    j["version"] = m.version;
    j["name"] = m.name;
    j["model"] = {{"T", m.model.horizon},
                  {"n_steps", m.model.n_steps},
                  {"d", m.model.dim},
                  {"backend", m.model.backend},
                  {"M", m.model.paths ? json(*m.model.paths) : json(nullptr)},
                  {"seed", m.model.seed ? json(*m.model.seed) : json(nullptr)}};
    j["data"] = {{"xi", m.data.xi},
                 {"V", m.data.V},
                 {"L", m.data.L},
                 {"U", m.data.U},
                 {"clip_terminal_barriers", m.data.clip_terminal_barriers}};
    j["generator"] = {{"catalog", m.generator.catalog},
                      {"expr", m.generator.expr},
                      {"declared", m.generator.declared},
                      {"linear_growth", m.generator.linear_growth ? json(*m.generator.linear_growth) : json(nullptr)},
                      {"split", m.generator.split}};
    j["scheme"] = {{"kind", m.scheme.kind},         {"variant", m.scheme.variant}, {"battery", m.scheme.battery},
                   {"direction", m.scheme.direction}, {"cases", m.scheme.cases},   {"case_seed", m.scheme.case_seed}};
    j["schedule"] = m.schedule;
    j["numerics"] = {{"tol", m.numerics.tol},
                     {"max_iter", m.numerics.max_iter},
                     {"beta", m.numerics.beta},
                     {"threads", m.numerics.threads},
                     {"degree", m.numerics.degree}};
    j["outputs"] = {{"directory", m.outputs.directory}, {"formats", m.outputs.formats}};
    json ex = json::array();
    for (const auto& e : m.expect) {
        ex.push_back({{"metric", e.metric}, {"op", e.op}, {"value", e.value}, {"tol", e.tol}});
    }
    j["expect"] = ex;
    return j.dump(2) + "\n";
}

} // namespace l1bsde
