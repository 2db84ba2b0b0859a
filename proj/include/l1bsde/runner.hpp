#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "l1bsde/analysis.hpp"
#include "l1bsde/bsde_mc.hpp"
#include "l1bsde/catalog.hpp"
#include "l1bsde/convolution.hpp"
#include "l1bsde/manifest.hpp"
#include "l1bsde/norms.hpp"
#include "l1bsde/penalization.hpp"
#include "l1bsde/reflected.hpp"

namespace l1bsde {

/// Column names and order are part of the output schema.
inline constexpr int output_schema_version = 1;

struct RunTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const {
        std::string out;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out += (c ? "," : "") + columns[c];
        }
        out += "\n";
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                out += (c ? "," : "") + r[c];
            }
            out += "\n";
        }
        return out;
    }
};

struct AssertionOutcome {
    Expectation expectation;
    std::optional<double> actual;
    bool passed = false;
};

struct RunRecord {
    std::string name;
    std::string backend;
    /// SHA-256 of the canonical manifest.
    std::string manifest_hash;
    /// Git blob id (SHA-1) of the canonical manifest.
    std::string input_digest;
    /// SHA-256 over scalars and tables; the reproducibility fingerprint.
    std::string result_digest;
    std::map<std::string, double> scalars;
    std::vector<RunTable> tables;
    std::vector<AssertionOutcome> assertions;
    std::string error;
    double wall_clock = 0.0;
    std::string output_dir;

    std::size_t failed_assertions() const {
        std::size_t n = 0;
        for (const auto& a : assertions) {
            n += a.passed ? 0 : 1;
        }
        return n;
    }
    /// 0 clean, 1 assertion failure, 2 run error.
    int exit_code() const { return !error.empty() ? 2 : failed_assertions() > 0 ? 1 : 0; }
};

struct RunOptions {
    /// Highest priority output directory; then the manifest's, then $L1BSDE_OUT_DIR, then "out".
    std::string out_dir;
    std::optional<std::size_t> threads;
    std::optional<double> beta;
    std::optional<double> tol;
    bool write_outputs = true;
    std::function<void(const std::string&)> progress;
};

namespace detail {

inline std::string hex(const unsigned char* p, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += digits[p[i] >> 4U];
        s += digits[p[i] & 15U];
    }
    return s;
}

inline std::string evp_digest(const std::string& data, const EVP_MD* md) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), out, &len, md, nullptr) != 1) {
        throw Error(ErrorCode::invalid_argument, "digest computation failed");
    }
    return hex(out, len);
}

} // namespace detail

inline std::string sha256_hex(const std::string& data) { return detail::evp_digest(data, EVP_sha256()); }

/// Content id as git computes it for a blob.
inline std::string git_blob_id(const std::string& data) {
    return detail::evp_digest("blob " + std::to_string(data.size()) + std::string(1, '\0') + data, EVP_sha1());
}

inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::pair<GeneratorSpec, GeneratorSpec> split_of(const GeneratorBlock& g) {
    if (!g.split.empty()) {
        return {*find_catalog(g.split[0]), *find_catalog(g.split[1])};
    }
    return *catalog_split(g.catalog);
}

inline GeneratorSpec build_generator(const ExperimentManifest& m) {
    const auto& g = m.generator;
    if (!g.expr.empty()) {
        GeneratorParams p;
        p.linear_growth = g.linear_growth;
        return expression_generator(Expression::parse(g.expr), m.model.horizon, expand_classes(g.declared), p);
    }
    if (!g.split.empty()) {
        const auto [a, b] = split_of(g);
        return sum_generator(a, b);
    }
    if (g.catalog == "zero" || g.catalog.empty()) {
        return zero_generator();
    }
    if (auto one = find_catalog(g.catalog)) {
        return *one;
    }
    const auto [a, b] = *catalog_split(g.catalog);
    return sum_generator(a, b);
}

/// Everything a lattice run needs, built from the data block.
struct LatticeData {
    BrownianLattice lattice;
    std::vector<double> xi;
    ForcingTerm V;
    BarrierPair barriers;
};

inline double eval_at(const Expression& e, double t, double horizon, std::span<const double> b) {
    return e(ExprContext{t, horizon, 0.0, {}, b});
}

inline LatticeData build_lattice_data(const ExperimentManifest& m) {
    const double T = m.model.horizon;
    BrownianLattice lattice(TimeGrid(T, m.model.n_steps), m.model.dim);
    const std::size_t n = lattice.n_steps();
    std::vector<double> xi;
    if (!m.data.xi.empty()) {
        const auto e = Expression::parse(m.data.xi);
        xi = terminal_values(lattice, [&](std::span<const double> b) { return eval_at(e, T, T, b); });
    }
    ForcingTerm V;
    if (m.data.V != "none") {
        const auto e = Expression::parse(m.data.V);
        V = ForcingTerm::from_rate(lattice, [&](double t, std::span<const double> b) { return eval_at(e, t, T, b); });
    }
    auto barrier = [&](const std::string& text, BarrierSide side) {
        if (text == "none") {
            return Barrier::absent(side);
        }
        const auto e = Expression::parse(text);
        auto values = lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
            const double v = eval_at(e, lattice.grid().time(k), T, b);
            if (k == n && m.data.clip_terminal_barriers && !xi.empty()) {
                return side == BarrierSide::lower ? std::min(v, xi[i]) : std::max(v, xi[i]);
            }
            return v;
        });
        if (!values.all_finite()) {
            throw Error(ErrorCode::validation_error,
                        std::string(side == BarrierSide::lower ? "data.L" : "data.U") + ": barrier is not finite");
        }
        return side == BarrierSide::lower ? Barrier::lower(std::move(values)) : Barrier::upper(std::move(values));
    };
    BarrierPair bp{barrier(m.data.L, BarrierSide::lower), barrier(m.data.U, BarrierSide::upper)};
    try {
        check_barrier_order(bp.lower, bp.upper);
    } catch (const NodeError& e) {
        throw Error(ErrorCode::validation_error, std::string("data.L/data.U: ") + e.what());
    }
    return LatticeData{std::move(lattice), std::move(xi), std::move(V), std::move(bp)};
}

inline NumericsConfig numerics_of(const ExperimentManifest& m) {
    NumericsConfig n;
    n.tol = m.numerics.tol;
    n.max_iter = m.numerics.max_iter;
    n.beta = m.numerics.beta;
    n.threads = m.numerics.threads;
    return n;
}

inline std::string fmt(double v) { return format_number(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline double expected_sum(const BrownianLattice& lattice, const NodeProcess& x, std::size_t k) {
    const auto w = lattice.node_weights(k);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        s += w[i] * x.at(k, i);
    }
    return s;
}

inline RunTable step_table(const BrownianLattice& lattice, const SolutionQuadruple& q) {
    RunTable t{"steps", {"step", "t", "y_mean", "y_min", "y_max", "dk_mean", "da_mean", "residual", "iterations"}, {}};
    for (std::size_t k = 0; k <= lattice.n_steps(); ++k) {
        const auto row = q.Y.step(k);
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        const bool last = k == lattice.n_steps();
        t.rows.push_back({fmt(k), fmt(lattice.grid().time(k)), fmt(expected_sum(lattice, q.Y, k)), fmt(*lo), fmt(*hi),
                          fmt(last ? 0.0 : expected_sum(lattice, q.dK, k)),
                          fmt(last ? 0.0 : expected_sum(lattice, q.dA, k)), fmt(q.diagnostics.residuals[k]),
                          fmt(q.diagnostics.iterations[k])});
    }
    return t;
}

inline void solution_scalars(RunRecord& r, const BrownianLattice& lattice, const SolutionQuadruple& q,
                             const BarrierPair& bp, double beta) {
    r.scalars["y0"] = q.y0();
    for (std::size_t j = 0; j < lattice.dim(); ++j) {
        r.scalars["z0." + std::to_string(j + 1)] = q.Z.at(0, 0)[j];
    }
    r.scalars["k_total"] = detail::expected_total(lattice, q.dK);
    r.scalars["a_total"] = detail::expected_total(lattice, q.dA);
    r.scalars["max_residual"] = q.diagnostics.max_residual;
    r.scalars["bracketed_nodes"] = static_cast<double>(q.diagnostics.bracketed_nodes);
    r.scalars["drift_h1"] = q.diagnostics.drift_h1;
    NormConfig nc;
    nc.beta = beta;
    const auto paths = PathSet::for_lattice(lattice, nc.path_samples, nc.seed);
    const auto norms = estimate_norms(q.Y, q.Z, q.drift, lattice.dt(), paths, nc);
    r.scalars["s_beta_y"] = norms.s_beta;
    r.scalars["m_beta_z"] = norms.m_beta;
    if (bp.lower.present() || bp.upper.present()) {
        const auto fo = flat_off_report(lattice, q, bp);
        r.scalars["flatoff.kl"] = fo.kl;
        r.scalars["flatoff.ua"] = fo.ua;
        r.scalars["flatoff.max_kl_product"] = fo.max_kl_product;
        r.scalars["flatoff.max_ua_product"] = fo.max_ua_product;
        r.scalars["flatoff.ortho_violations"] = static_cast<double>(fo.ortho_violations);
    }
}

inline SolutionQuadruple solve_direct(const LatticeData& d, const GeneratorSpec& g, const NumericsConfig& num) {
    return detail::backward_lattice(d.lattice, d.xi, g, d.V, d.barriers.lower, d.barriers.upper, num);
}

inline void run_direct(RunRecord& r, const ExperimentManifest& m, const NumericsConfig& num) {
    const auto g = build_generator(m);
    if (m.model.backend == "mc") {
        const auto bundle = sample_paths(TimeGrid(m.model.horizon, m.model.n_steps), m.model.dim, *m.model.paths,
                                         *m.model.seed);
        const auto xe = Expression::parse(m.data.xi);
        const double T = m.model.horizon;
        const auto xi = terminal_values(bundle, [&](std::span<const double> b) { return eval_at(xe, T, T, b); });
        NodeProcess dv;
        if (m.data.V != "none") {
            const auto ve = Expression::parse(m.data.V);
            const double dt = bundle.grid().dt();
            dv = bundle.make_process([&](std::size_t k, std::size_t, std::span<const double> b) {
                return k < bundle.n_steps() ? eval_at(ve, bundle.grid().time(k), T, b) * dt : 0.0;
            });
        }
        RegressionConfig rc;
        rc.degree = m.numerics.degree;
        rc.numerics = num;
        const auto s = solve_bsde_mc(bundle, xi, g, dv, rc);
        r.scalars["y0"] = s.y0;
        r.scalars["y0_se"] = s.y0_se;
        for (std::size_t j = 0; j < s.z0.size(); ++j) {
            r.scalars["z0." + std::to_string(j + 1)] = s.z0[j];
        }
        r.scalars["worst_condition"] = s.worst_condition;
        r.scalars["max_residual"] = s.max_residual;
        r.scalars["xi_abs_mean"] = s.xi_abs_mean;
        r.scalars["xi_abs_max"] = s.xi_abs_max;
        RunTable t{"steps", {"step", "t", "y_mean", "condition"}, {}};
        for (std::size_t k = 0; k <= bundle.n_steps(); ++k) {
            t.rows.push_back({fmt(k), fmt(bundle.grid().time(k)), fmt(detail::shifted_mean(s.Y.step(k))),
                              fmt(k < bundle.n_steps() ? s.condition[k] : 1.0)});
        }
        r.tables.push_back(std::move(t));
        return;
    }
    const auto d = build_lattice_data(m);
    const auto q = solve_direct(d, g, num);
    solution_scalars(r, d.lattice, q, d.barriers, num.beta);
    r.tables.push_back(step_table(d.lattice, q));
}

inline RunTable ladder_table(const std::vector<LadderEntry>& entries, const char* name) {
    RunTable t{name,
               {"n", "y0", "sup_y", "s_beta_y", "m_beta_z", "s_beta_k", "s_beta_a", "sup_k", "sup_a", "k_total",
                "a_total"},
               {}};
    for (const auto& e : entries) {
        t.rows.push_back({fmt(e.n), fmt(e.solution.y0()), fmt(e.gaps.sup_y), fmt(e.gaps.s_beta_y),
                          fmt(e.gaps.m_beta_z), fmt(e.gaps.s_beta_k), fmt(e.gaps.s_beta_a), fmt(e.gaps.sup_k),
                          fmt(e.gaps.sup_a), fmt(e.k_total), fmt(e.a_total)});
    }
    return t;
}

inline void run_ladder(RunRecord& r, const ExperimentManifest& m, const NumericsConfig& num) {
    const auto g = build_generator(m);
    const auto d = build_lattice_data(m);
    LadderConfig lc;
    lc.numerics = num;
    lc.norms.beta = num.beta;
    lc.throw_on_violation = false;
    const auto& v = m.scheme.variant;
    PenalizationLadder ladder;
    if (v == "lower") {
        ladder = penalization_ladder_lower(d.lattice, d.xi, g, d.V, d.barriers.lower, m.schedule, lc);
    } else if (v == "upper") {
        ladder = penalization_ladder_upper(d.lattice, d.xi, g, d.V, d.barriers.upper, m.schedule, lc);
    } else if (v == "double") {
        ladder = penalization_ladder_double(d.lattice, d.xi, g, d.V, d.barriers, m.schedule, lc);
    } else {
        const auto mv = v == "via_upper_rbsde"   ? MixedVariant::via_upper_rbsde
                        : v == "via_lower_rbsde" ? MixedVariant::via_lower_rbsde
                                                 : MixedVariant::via_bsde;
        ladder = penalization_ladder_mixed(d.lattice, d.xi, g, d.V, d.barriers, m.schedule, mv, lc);
    }
    const auto& last = ladder.entries.back();
    r.scalars["ladder.violations"] = static_cast<double>(ladder.monotonicity_violations);
    r.scalars["ladder.worst_monotonicity"] = ladder.worst_monotonicity;
    r.scalars["ladder.sandwich_violations"] = static_cast<double>(ladder.sandwich_violations);
    r.scalars["ladder.gaps_nonincreasing"] = ladder.gaps_nonincreasing ? 1.0 : 0.0;
    r.scalars["ladder.y0_limit"] = last.solution.y0();
    r.scalars["ladder.y0_direct"] = ladder.reference.y0();
    r.scalars["ladder.root_gap"] = std::fabs(last.solution.y0() - ladder.reference.y0());
    r.scalars["ladder.final.sup_y"] = last.gaps.sup_y;
    r.scalars["ladder.final.sup_k"] = last.gaps.sup_k;
    r.scalars["ladder.final.sup_a"] = last.gaps.sup_a;
    r.tables.push_back(ladder_table(ladder.entries, "ladder"));
}

inline ConvolutionDirection direction_of(const ExperimentManifest& m) {
    return m.scheme.direction == "maximal" ? ConvolutionDirection::maximal : ConvolutionDirection::minimal;
}

inline void run_convolution(RunRecord& r, const ExperimentManifest& m, const NumericsConfig& num) {
    const auto d = build_lattice_data(m);
    const auto [g1, g2] = split_of(m.generator);
    ConvolutionConfig cc;
    cc.direction = direction_of(m);
    cc.numerics = num;
    cc.throw_on_violation = false;
    const auto res = solve_minimal_via_convolution(d.lattice, d.xi, g1, g2, d.V, m.schedule, cc);
    r.scalars["conv.violations"] = static_cast<double>(res.monotonicity_violations);
    r.scalars["conv.worst_monotonicity"] = res.worst_monotonicity;
    r.scalars["conv.cauchy_gap"] = res.cauchy_gap;
    r.scalars["conv.y0_limit"] = res.limit().y0();
    RunTable t{"convolution", {"n", "y0", "bracketed_nodes", "max_residual"}, {}};
    for (const auto& e : res.entries) {
        t.rows.push_back({fmt(e.n), fmt(e.solution.y0()), fmt(e.solution.diagnostics.bracketed_nodes),
                          fmt(e.solution.diagnostics.max_residual)});
    }
    r.tables.push_back(std::move(t));
}

inline void run_battery(RunRecord& r, const ExperimentManifest& m, const NumericsConfig& num) {
    const auto& b = m.scheme.battery;
    if (b == "comparison") {
        ComparisonConfig cc;
        cc.numerics = num;
        cc.threads = num.threads;
        const auto rep = comparison_battery(generate_comparison_cases(m.scheme.cases, m.scheme.case_seed), cc);
        r.scalars["comparison.cases"] = static_cast<double>(rep.outcomes.size());
        r.scalars["comparison.lipschitz_cases"] = static_cast<double>(rep.lipschitz_cases);
        r.scalars["comparison.lipschitz_pass"] = static_cast<double>(rep.lipschitz_y_pass);
        r.scalars["comparison.increment_cases"] = static_cast<double>(rep.equal_barrier_cases);
        r.scalars["comparison.increment_pass"] = static_cast<double>(rep.increment_pass);
        r.scalars["comparison.osgood_cases"] = static_cast<double>(rep.osgood_cases);
        r.scalars["comparison.osgood_pass"] = static_cast<double>(rep.osgood_pass);
        r.scalars["comparison.osgood_inconclusive"] = static_cast<double>(rep.osgood_inconclusive);
        r.scalars["comparison.osgood_confirmed"] = static_cast<double>(rep.osgood_confirmed);
        r.scalars["comparison.errors"] = static_cast<double>(rep.errors);
        r.scalars["comparison.all_ok"] = rep.all_ok() ? 1.0 : 0.0;
        RunTable t{"cases", {"id", "kind", "branch", "class", "verdict", "y_margin", "k_margin", "a_margin"}, {}};
        for (const auto& o : rep.outcomes) {
            t.rows.push_back({o.id, to_string(o.kind), to_string(o.branch), to_string(o.cls), to_string(o.verdict),
                              fmt(o.y_margin), fmt(o.k_margin), fmt(o.a_margin)});
        }
        r.tables.push_back(std::move(t));
        return;
    }
    const auto d = build_lattice_data(m);
    if (b == "mokobodzki") {
        const auto g = build_generator(m);
        const auto w = mokobodzki_check(d.lattice, d.xi, g, d.V, d.barriers, WitnessStrategy::use_drbsde_solution, num);
        r.scalars["mokobodzki.sandwich_ok"] = w.sandwich_ok ? 1.0 : 0.0;
        r.scalars["mokobodzki.residual"] = w.decomposition_residual;
        r.scalars["mokobodzki.c_variation"] = w.c_variation;
        r.scalars["mokobodzki.g_at_x"] = w.g_at_X_norm;
        return;
    }
    if (b == "uniqueness") {
        const auto g = build_generator(m);
        UniquenessConfig uc;
        uc.numerics = num;
        if (!m.schedule.empty()) {
            uc.ladder_schedule = m.schedule;
        }
        const auto u = uniqueness_probe(d.lattice, d.xi, g, d.V, d.barriers, uc);
        r.scalars["uniqueness.in_class"] = u.in_class ? 1.0 : 0.0;
        r.scalars["uniqueness.direct_deviation"] = u.direct_deviation;
        r.scalars["uniqueness.ladder_deviation"] = u.ladder_deviation;
        r.scalars["uniqueness.pass"] = u.verdict == Verdict::pass ? 1.0 : 0.0;
        r.scalars["uniqueness.inconclusive"] = u.verdict == Verdict::inconclusive ? 1.0 : 0.0;
        return;
    }
    // approximation
    const auto [g1, g2] = split_of(m.generator);
    const auto dir = direction_of(m);
    ApproximationConfig ac;
    ac.numerics = num;
    ac.norms.beta = num.beta;
    ac.throw_on_violation = false;
    const auto rep = approximation_battery(d.lattice, d.xi, d.V, d.barriers,
                                           convolution_sequence(g1, g2, dir),
                                           dir == ConvolutionDirection::minimal ? SequenceDirection::nondecreasing
                                                                                : SequenceDirection::nonincreasing,
                                           m.schedule, ac);
    r.scalars["approximation.y_violations"] = static_cast<double>(rep.y_violations);
    r.scalars["approximation.k_violations"] = static_cast<double>(rep.k_violations);
    r.scalars["approximation.a_violations"] = static_cast<double>(rep.a_violations);
    r.scalars["approximation.gaps_nonincreasing"] = rep.gaps_nonincreasing ? 1.0 : 0.0;
    r.scalars["approximation.final.sup_y"] = rep.final_gaps.sup_y;
    r.scalars["approximation.final.sup_k"] = rep.final_gaps.sup_k;
    r.scalars["approximation.final.sup_a"] = rep.final_gaps.sup_a;
    r.scalars["approximation.y0_limit"] = rep.entries.back().solution.y0();
    r.tables.push_back(ladder_table(rep.entries, "approximation"));
}

inline bool check(const Expectation& e, double v) {
    if (e.op == "<=") return v <= e.value + e.tol;
    if (e.op == ">=") return v >= e.value - e.tol;
    if (e.op == "<") return v < e.value;
    if (e.op == ">") return v > e.value;
    return std::fabs(v - e.value) <= e.tol;
}

inline std::string result_payload(const RunRecord& r) {
    std::string s = "schema " + std::to_string(output_schema_version) + "\n";
    for (const auto& [k, v] : r.scalars) {
        s += k + "=" + format_number(v) + "\n";
    }
    for (const auto& t : r.tables) {
        s += "[" + t.name + "]\n" + t.csv();
    }
    return s;
}

inline nlohmann::json record_json(const RunRecord& r) {
    nlohmann::json j;
    j["schema"] = output_schema_version;
    j["name"] = r.name;
    j["backend"] = r.backend;
    j["manifest_hash"] = r.manifest_hash;
    j["input_digest"] = r.input_digest;
    j["result_digest"] = r.result_digest;
    nlohmann::json sc = nlohmann::json::object();
    for (const auto& [k, v] : r.scalars) {
        // JSON has no inf/nan; keep them readable as strings.
        sc[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_number(v));
    }
    j["scalars"] = sc;
    nlohmann::json as = nlohmann::json::array();
    for (const auto& a : r.assertions) {
        as.push_back({{"metric", a.expectation.metric},
                      {"op", a.expectation.op},
                      {"value", a.expectation.value},
                      {"tol", a.expectation.tol},
                      {"actual", a.actual ? nlohmann::json(format_number(*a.actual)) : nlohmann::json(nullptr)},
                      {"passed", a.passed}});
    }
    j["assertions"] = as;
    nlohmann::json tables = nlohmann::json::array();
    for (const auto& t : r.tables) {
        tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", t.rows.size()}});
    }
    j["tables"] = tables;
    j["error"] = r.error;
    j["wall_clock_seconds"] = r.wall_clock;
    j["exit_code"] = r.exit_code();
    return j;
}

} // namespace detail

inline std::string resolve_out_dir(const ExperimentManifest& m, const RunOptions& opt) {
    if (!opt.out_dir.empty()) {
        return opt.out_dir;
    }
    if (!m.outputs.directory.empty()) {
        return m.outputs.directory;
    }
    if (const char* env = std::getenv("L1BSDE_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "out";
}

/**
 * Runs a manifest. Solver errors are caught and recorded (exit code 2) so
 * that a partial record is still written; validation errors propagate and
 * nothing is written.
 */
inline RunRecord run_manifest(ExperimentManifest m, const RunOptions& opt = {}) {
    if (opt.threads) {
        m.numerics.threads = *opt.threads;
    }
    if (opt.beta) {
        m.numerics.beta = *opt.beta;
    }
    if (opt.tol) {
        m.numerics.tol = *opt.tol;
    }
    validate(m);
    auto say = [&](const std::string& s) {
        if (opt.progress) {
            opt.progress(s);
        }
    };
    RunRecord r;
    r.name = m.name;
    r.backend = m.model.backend;
    const std::string canonical = serialize_manifest(m);
    r.manifest_hash = sha256_hex(canonical);
    r.input_digest = git_blob_id(canonical);
    const auto t0 = std::chrono::steady_clock::now();
    say("run " + m.name + ": scheme " + m.scheme.kind +
        (m.scheme.variant.empty() ? "" : "/" + m.scheme.variant) +
        (m.scheme.battery.empty() ? "" : "/" + m.scheme.battery));
    const auto num = detail::numerics_of(m);
    try {
        if (m.scheme.kind == "direct") {
            detail::run_direct(r, m, num);
        } else if (m.scheme.kind == "ladder") {
            detail::run_ladder(r, m, num);
        } else if (m.scheme.kind == "convolution") {
            detail::run_convolution(r, m, num);
        } else {
            detail::run_battery(r, m, num);
        }
    } catch (const Error& e) {
        // Data that only fails once evaluated on the lattice (L > U) is still a validation error.
        if (e.code() == ErrorCode::validation_error) {
            throw;
        }
        r.error = std::string("scheme ") + m.scheme.kind + ": " + e.what();
        say("error: " + r.error);
    }
    r.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& e : m.expect) {
        AssertionOutcome a;
        a.expectation = e;
        if (auto it = r.scalars.find(e.metric); it != r.scalars.end()) {
            a.actual = it->second;
            a.passed = detail::check(e, it->second);
        }
        say(std::string(a.passed ? "pass " : "FAIL ") + e.metric + " " + e.op + " " + format_number(e.value) +
            " (actual " + (a.actual ? format_number(*a.actual) : std::string("missing")) + ")");
        r.assertions.push_back(std::move(a));
    }
    r.result_digest = sha256_hex(detail::result_payload(r));
    if (opt.write_outputs) {
        namespace fs = std::filesystem;
        const fs::path dir = fs::path(resolve_out_dir(m, opt)) / m.name;
        fs::create_directories(dir);
        r.output_dir = dir.string();
        const auto& f = m.outputs.formats;
        if (std::find(f.begin(), f.end(), "csv") != f.end()) {
            for (const auto& t : r.tables) {
                std::ofstream(dir / (t.name + ".csv"), std::ios::binary) << t.csv();
            }
        }
        if (std::find(f.begin(), f.end(), "json") != f.end()) {
            std::ofstream(dir / "record.json", std::ios::binary) << detail::record_json(r).dump(2) << "\n";
        }
        std::ofstream(dir / "manifest.canonical.json", std::ios::binary) << canonical;
        say("wrote " + r.output_dir);
    }
    say("done " + m.name + " in " + format_number(std::round(r.wall_clock * 1000.0) / 1000.0) + " s, exit " +
        std::to_string(r.exit_code()));
    return r;
}

inline RunRecord run_manifest_file(const std::string& path, const RunOptions& opt = {}) {
    return run_manifest(load_manifest(path), opt);
}

} // namespace l1bsde
