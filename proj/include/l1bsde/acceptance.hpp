#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "l1bsde/analysis.hpp"
#include "l1bsde/bsde_mc.hpp"
#include "l1bsde/penalization.hpp"
#include "l1bsde/philox.hpp"
#include "l1bsde/reflected.hpp"
#include "l1bsde/regularize.hpp"
#include "l1bsde/runner.hpp"

#ifndef L1BSDE_MANIFEST_DIR
#define L1BSDE_MANIFEST_DIR "manifests"
#endif

namespace l1bsde {

struct CriterionResult {
    int number = 0;
    std::string key;
    std::string title;
    bool passed = false;
    /// Measured values, one "name=value" per entry.
    std::vector<std::string> measured;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    std::string manifest_dir = L1BSDE_MANIFEST_DIR;
    /// Criterion keys or numbers; empty runs the whole suite.
    std::vector<std::string> only;
    std::size_t threads = 1;
    std::function<void(const CriterionResult&)> on_result;
};

struct AcceptanceSummary {
    std::string suite;
    std::vector<CriterionResult> results;
    std::size_t passed() const {
        return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](auto& r) { return r.passed; }));
    }
    bool all_passed() const { return passed() == results.size(); }
};

namespace acceptance {

inline std::string kv(const std::string& k, double v) { return k + "=" + format_number(v); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<double> quadratic_xi(const BrownianLattice& lattice) {
    return terminal_values(lattice, [](std::span<const double> b) { return b[0] * b[0]; });
}

/// Random g = 0 barrier problem; barriers are clipped at T so L_T <= xi <= U_T.
struct FuzzInstance {
    std::size_t id = 0;
    double horizon = 1.0;
    std::size_t n_steps = 8;
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0, w = 1;
    double l0 = 0, l1 = 0, l2 = 0, w2 = 1;
    double gap = 0.5, curvature = 0.0;
};

inline std::vector<FuzzInstance> fuzz_suite(std::size_t count = 100, std::uint64_t seed = 2718) {
    std::vector<FuzzInstance> out;
    for (std::size_t j = 0; j < count; ++j) {
        std::size_t c = 0;
        auto u = [&](double lo, double hi) { return lo + (hi - lo) * addressed_uniform(seed, j, c++); };
        FuzzInstance f;
        f.id = j;
        f.n_steps = 1 + static_cast<std::size_t>(u(0.0, 64.0));
        f.horizon = u(0.25, 2.0);
        f.a0 = u(-1, 1);
        f.a1 = u(-1, 1);
        f.a2 = u(0, 1);
        f.a3 = u(-1, 1);
        f.w = u(0.5, 3.0);
        f.l0 = u(-0.5, 1.0);
        f.l1 = u(-0.5, 0.5);
        f.l2 = u(-0.5, 0.5);
        f.w2 = u(0.5, 3.0);
        f.gap = u(0.05, 1.0);
        f.curvature = u(0.0, 0.5);
        out.push_back(f);
    }
    return out;
}

struct FuzzData {
    BrownianLattice lattice;
    std::vector<double> xi;
    Barrier lower;
    Barrier upper;
};

inline FuzzData build(const FuzzInstance& f) {
    BrownianLattice lattice(TimeGrid(f.horizon, f.n_steps), 1);
    const auto xi = terminal_values(lattice, [&](std::span<const double> b) {
        return f.a0 + f.a1 * b[0] + f.a2 * b[0] * b[0] + f.a3 * std::sin(f.w * b[0]);
    });
    const std::size_t n = f.n_steps;
    auto low = [&](std::size_t k, double b) { return f.l0 + f.l1 * std::cos(f.w2 * b) + f.l2 * lattice.grid().time(k); };
    auto lower = lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
        const double v = low(k, b[0]);
        return k == n ? std::min(v, xi[i]) : v;
    });
    auto upper = lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
        const double v = low(k, b[0]) + f.gap + f.curvature * b[0] * b[0];
        return k == n ? std::max(v, xi[i]) : v;
    });
    return FuzzData{lattice, xi, Barrier::lower(std::move(lower)), Barrier::upper(std::move(upper))};
}

struct FuzzOutcome {
    double worst_oracle = 0.0;
    std::size_t oracle_fail = 0;
    std::size_t ortho_violations = 0;
    double worst_product = 0.0;
    std::size_t solves = 0;
    std::size_t witness_fail = 0;
    double worst_residual = 0.0;
    /// Nodes where a reflection increment is positive; shows the barriers bite.
    std::size_t active_nodes = 0;
};

inline void close_witness(FuzzOutcome& o, const BrownianLattice& lattice, const BarrierPair& bp,
                          const SolutionQuadruple& q) {
    const auto w = witness_from_solution(lattice, zero_generator(), {}, bp, q);
    ++o.solves;
    for (std::size_t k = 0; k + 1 < q.dK.step_count(); ++k) {
        for (std::size_t i = 0; i < q.dK.size(k); ++i) {
            o.active_nodes += (q.dK.at(k, i) > 0.0 || q.dA.at(k, i) > 0.0) ? 1 : 0;
        }
    }
    o.worst_residual = std::max(o.worst_residual, w.decomposition_residual);
    if (!w.sandwich_ok || !(w.decomposition_residual <= 1e-10)) {
        ++o.witness_fail;
    }
}

/// Runs the fuzz suite once; criteria 3, 4 and 9 read different parts of it.
inline std::pair<FuzzOutcome, FuzzOutcome> run_fuzz() {
    FuzzOutcome snell, dynkin;
    for (const auto& f : fuzz_suite()) {
        const auto d = build(f);
        const BarrierPair lower_only{d.lower, Barrier::absent(BarrierSide::upper)};
        const auto q1 = solve_rbsde_lower(d.lattice, d.xi, zero_generator(), {}, d.lower);
        const double g1 = norms::sup_node_gap(q1.Y, snell_oracle(d.lattice, d.xi, d.lower));
        snell.worst_oracle = std::max(snell.worst_oracle, g1);
        snell.oracle_fail += g1 <= 1e-10 ? 0 : 1;
        close_witness(snell, d.lattice, lower_only, q1);

        const BarrierPair both{d.lower, d.upper};
        const auto q2 = solve_drbsde(d.lattice, d.xi, zero_generator(), {}, both);
        const double g2 = norms::sup_node_gap(q2.Y, dynkin_oracle(d.lattice, d.xi, both));
        dynkin.worst_oracle = std::max(dynkin.worst_oracle, g2);
        dynkin.oracle_fail += g2 <= 1e-10 ? 0 : 1;
        const auto fo = flat_off_report(d.lattice, q2, both);
        dynkin.ortho_violations += fo.ortho_violations;
        dynkin.worst_product = std::max({dynkin.worst_product, fo.max_kl_product, fo.max_ua_product});
        close_witness(dynkin, d.lattice, both, q2);
    }
    return {snell, dynkin};
}

inline CriterionResult martingale() {
    CriterionResult r{1, "martingale", "Martingale exactness (g=0, xi=B_T^2)"};
    double worst = 0.0;
    for (std::size_t n : {1, 2, 7, 64, 333}) {
        BrownianLattice lattice(TimeGrid(1.0, n), 1);
        worst = std::max(worst, std::fabs(solve_bsde(lattice, quadratic_xi(lattice), zero_generator()).y0() - 1.0));
    }
    const auto t0 = std::chrono::steady_clock::now();
    BrownianLattice lattice(TimeGrid(1.0, 512), 1);
    const double y0 = solve_bsde(lattice, quadratic_xi(lattice), zero_generator()).y0();
    const double secs = seconds_since(t0);
    worst = std::max(worst, std::fabs(y0 - 1.0));
    r.measured = {kv("max_abs_error", worst), kv("seconds_at_512", secs)};
    r.passed = worst <= 1e-12 && secs < 1.0;
    return r;
}

inline CriterionResult linear_driver() {
    CriterionResult r{2, "linear", "Linear driver closed form (g=0.5y, xi=1)"};
    double err[2];
    int j = 0;
    for (std::size_t n : {512, 1024}) {
        BrownianLattice lattice(TimeGrid(1.0, n), 1);
        const std::vector<double> xi(lattice.node_count(n), 1.0);
        err[j++] = std::fabs(solve_bsde(lattice, xi, affine_generator(0.5)).y0() - std::exp(0.5));
    }
    const double ratio = err[0] / err[1];
    r.measured = {kv("error_512", err[0]), kv("error_1024", err[1]), kv("ratio", ratio)};
    r.passed = err[0] <= 5e-3 && ratio >= 1.7 && ratio <= 2.3;
    return r;
}

inline CriterionResult snell_criterion(const FuzzOutcome& o) {
    CriterionResult r{3, "snell", "Snell oracle equality (100-case fuzz suite)"};
    r.measured = {kv("cases_failing", static_cast<double>(o.oracle_fail)), kv("worst_gap", o.worst_oracle),
                  kv("active_nodes", static_cast<double>(o.active_nodes))};
    r.passed = o.oracle_fail == 0;
    return r;
}

inline CriterionResult dynkin_criterion(const FuzzOutcome& o) {
    CriterionResult r{4, "dynkin", "Dynkin oracle equality, orthogonality, flat-off"};
    r.measured = {kv("cases_failing", static_cast<double>(o.oracle_fail)), kv("worst_gap", o.worst_oracle),
                  kv("active_nodes", static_cast<double>(o.active_nodes)),
                  kv("ortho_violations", static_cast<double>(o.ortho_violations)),
                  kv("worst_flatoff_product", o.worst_product)};
    r.passed = o.oracle_fail == 0 && o.ortho_violations == 0 && o.worst_product == 0.0;
    return r;
}

inline CriterionResult mokobodzki_criterion(const FuzzOutcome& a, const FuzzOutcome& b) {
    CriterionResult r{9, "mokobodzki", "Mokobodzki witness closure over fuzz solves"};
    const std::size_t fail = a.witness_fail + b.witness_fail;
    r.measured = {kv("solves", static_cast<double>(a.solves + b.solves)), kv("failures", static_cast<double>(fail)),
                  kv("worst_residual", std::max(a.worst_residual, b.worst_residual))};
    r.passed = fail == 0 && a.solves + b.solves > 0;
    return r;
}

inline CriterionResult penalization() {
    CriterionResult r{5, "penalization", "Penalization ladder on xi=B_T^2, L=1/2"};
    const auto t0 = std::chrono::steady_clock::now();
    BrownianLattice lattice(TimeGrid(1.0, 32), 1);
    const auto xi = quadratic_xi(lattice);
    auto L = lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double>) {
        return k == 32 ? std::min(0.5, xi[i]) : 0.5;
    });
    LadderConfig cfg;
    cfg.throw_on_violation = false;
    const auto ladder = penalization_ladder_lower(lattice, xi, zero_generator(), {}, Barrier::lower(std::move(L)),
                                                  {1, 4, 16, 64, 256, 1024}, cfg);
    const double secs = seconds_since(t0);
    const auto& last = ladder.entries.back().gaps;
    r.measured = {kv("violations", static_cast<double>(ladder.monotonicity_violations)), kv("sup_y_gap", last.sup_y),
                  kv("sup_k_gap", last.sup_k), kv("seconds", secs)};
    r.passed = ladder.monotonicity_violations == 0 && last.sup_y <= 1e-2 && last.sup_k <= 5e-2 && secs < 10.0;
    return r;
}

inline CriterionResult triple_variant() {
    CriterionResult r{6, "triple", "Three DRBSDE penalization variants agree"};
    BrownianLattice lattice(TimeGrid(1.0, 32), 1);
    const auto xi = terminal_values(lattice, [](std::span<const double> b) { return std::sin(2.0 * b[0]) + 0.5 * b[0]; });
    auto lower = lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
        const double v = -0.3 + 0.2 * std::cos(b[0]);
        return k == 32 ? std::min(v, xi[i]) : v;
    });
    auto upper = lattice.make_process([&](std::size_t k, std::size_t i, std::span<const double> b) {
        const double v = 0.4 + 0.2 * std::sin(b[0]);
        return k == 32 ? std::max(v, xi[i]) : v;
    });
    const BarrierPair bp{Barrier::lower(std::move(lower)), Barrier::upper(std::move(upper))};
    const auto g = affine_generator(0.3, {0.2}, 0.1);
    const std::vector<double> schedule{1, 4, 16, 64, 256, 1024};
    LadderConfig cfg;
    cfg.throw_on_violation = false;
    double worst = 0.0;
    std::size_t sandwich = 0;
    std::size_t monotone = 0;
    double direct = 0.0;
    for (auto v : {MixedVariant::via_upper_rbsde, MixedVariant::via_lower_rbsde, MixedVariant::via_bsde}) {
        const auto ladder = penalization_ladder_mixed(lattice, xi, g, {}, bp, schedule, v, cfg);
        direct = ladder.reference.y0();
        const double gap = std::fabs(ladder.entries.back().solution.y0() - direct);
        r.measured.push_back(kv(std::string("root_gap.") + to_string(v), gap));
        worst = std::max(worst, gap);
        sandwich += ladder.sandwich_violations;
        monotone += ladder.monotonicity_violations;
    }
    r.measured.push_back(kv("y0_direct", direct));
    r.measured.push_back(kv("sandwich_violations", static_cast<double>(sandwich)));
    r.measured.push_back(kv("monotonicity_violations", static_cast<double>(monotone)));
    r.passed = worst <= 2e-2 && sandwich == 0;
    return r;
}

inline CriterionResult comparison(std::size_t threads) {
    CriterionResult r{7, "comparison", "Comparison battery (200 cases)"};
    ComparisonConfig cfg;
    cfg.threads = threads;
    const auto rep = comparison_battery(generate_comparison_cases(200, 7), cfg);
    auto d = [](std::size_t v) { return static_cast<double>(v); };
    r.measured = {kv("lipschitz_pass", d(rep.lipschitz_y_pass)), kv("lipschitz_cases", d(rep.lipschitz_cases)),
                  kv("increment_pass", d(rep.increment_pass)), kv("equal_barrier_cases", d(rep.equal_barrier_cases)),
                  kv("osgood_pass", d(rep.osgood_pass)), kv("osgood_inconclusive", d(rep.osgood_inconclusive)),
                  kv("osgood_confirmed", d(rep.osgood_confirmed)), kv("errors", d(rep.errors))};
    r.passed = rep.outcomes.size() == 200 && rep.lipschitz_y_pass == rep.lipschitz_cases &&
               rep.increment_pass == rep.equal_barrier_cases && rep.osgood_confirmed == 0 && rep.errors == 0 &&
               rep.osgood_pass + rep.osgood_inconclusive == rep.osgood_cases;
    return r;
}

inline double probe(const GeneratorSpec& g, double z) {
    const double b = 0.0;
    const EvalPoint p{0.0, 0, 0, std::span<const double>(&b, 1)};
    return g(p, 0.0, std::span<const double>(&z, 1));
}

inline CriterionResult convolution_oracle() {
    CriterionResult r{8, "convolution", "Convolution regularizer oracle"};
    const auto sq = expression_generator(Expression::parse("z^2"), 1.0);
    const auto moreau = inf_convolve_z(sq, 4.0, 0.0, 1.0);
    double moreau_err = 0.0;
    const double zs[] = {0.0, 1.0, 3.0};
    const double want[] = {0.0, 1.0, 8.0};
    for (int j = 0; j < 3; ++j) {
        moreau_err = std::max(moreau_err, std::fabs(probe(moreau, zs[j]) - want[j]));
    }
    const auto root = expression_generator(Expression::parse("sqrt(abs(z))"), 1.0);
    const auto fixed = inf_convolve_z(root, 1.0, 0.0, 0.5);
    const std::vector<double> probes{-3.0, -1.0, -0.25, 0.0, 0.3, 1.0, 2.0, 5.0};
    std::size_t holder_mismatch = 0;
    for (double z : probes) {
        holder_mismatch += probe(fixed, z) == probe(root, z) ? 0 : 1;
    }
    std::size_t monotone = 0;
    double worst = 0.0;
    std::vector<double> prev(probes.size(), -HUGE_VAL);
    for (int n = 1; n <= 256; ++n) {
        const auto gn = inf_convolve_z(sq, n, 0.0, 1.0);
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const double v = probe(gn, probes[j]);
            if (v < prev[j]) {
                ++monotone;
                worst = std::max(worst, prev[j] - v);
            }
            prev[j] = v;
        }
    }
    r.measured = {kv("moreau_max_error", moreau_err), kv("holder_mismatches", static_cast<double>(holder_mismatch)),
                  kv("monotonicity_violations", static_cast<double>(monotone)), kv("worst_decrease", worst)};
    r.passed = moreau_err <= 1e-3 && holder_mismatch == 0 && monotone == 0;
    return r;
}

inline CriterionResult monte_carlo(std::size_t threads) {
    CriterionResult r{10, "montecarlo", "Monte Carlo vs lattice (g=-y^3+1, M=1e5)"};
    const auto t0 = std::chrono::steady_clock::now();
    const TimeGrid grid(1.0, 64);
    const auto g = expression_generator(Expression::parse("-y^3 + 1"), 1.0);
    RegressionConfig cfg;
    cfg.degree = 2;
    cfg.numerics.threads = threads;
    auto once = [&] {
        const auto bundle = sample_paths(grid, 1, 100000, 7);
        const auto xi = terminal_values(bundle, [](std::span<const double> b) { return b[0] * b[0]; });
        return solve_bsde_mc(bundle, xi, g, {}, cfg);
    };
    const auto a = once();
    const double secs = seconds_since(t0);
    const auto b = once();
    BrownianLattice lattice(grid, 1);
    const double lat = solve_bsde(lattice, quadratic_xi(lattice), g).y0();
    const double diff = std::fabs(a.y0 - lat);
    r.measured = {kv("y0_mc", a.y0), kv("y0_se", a.y0_se), kv("y0_lattice", lat), kv("abs_diff", diff),
                  kv("bitwise_repeat", a.y0 == b.y0 ? 1.0 : 0.0), kv("seconds", secs)};
    r.passed = diff <= 2e-2 && a.y0 == b.y0 && secs < 60.0;
    return r;
}

inline CriterionResult determinism(const std::string& dir, std::size_t threads) {
    CriterionResult r{11, "determinism", "Manifest determinism and exit-code contract"};
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_directory(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".json") {
                files.push_back(e.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    RunOptions opt;
    opt.write_outputs = false;
    opt.threads = threads;
    std::size_t reruns = 0;
    std::size_t mismatches = 0;
    std::size_t unexpected_exit = 0;
    bool injected_nonzero = false;
    bool snell_ok = false;
    for (const auto& f : files) {
        const auto m = load_manifest(f.string());
        const auto a = run_manifest(m, opt);
        if (m.name == "injected_failure") {
            injected_nonzero = a.exit_code() != 0;
            continue;
        }
        unexpected_exit += a.exit_code() == 0 ? 0 : 1;
        if (m.name == "snell_penalization") {
            snell_ok = a.exit_code() == 0 && a.scalars.at("ladder.gaps_nonincreasing") == 1.0;
        }
        if (m.model.backend == "lattice") {
            const auto b = run_manifest(m, opt);
            ++reruns;
            mismatches += a.result_digest == b.result_digest && a.manifest_hash == b.manifest_hash ? 0 : 1;
        }
    }
    r.measured = {kv("manifests", static_cast<double>(files.size())), kv("lattice_reruns", static_cast<double>(reruns)),
                  kv("digest_mismatches", static_cast<double>(mismatches)),
                  kv("unexpected_nonzero_exits", static_cast<double>(unexpected_exit)),
                  kv("injected_failure_nonzero", injected_nonzero ? 1.0 : 0.0),
                  kv("snell_exit0_gaps_nonincreasing", snell_ok ? 1.0 : 0.0)};
    r.passed = reruns > 0 && mismatches == 0 && unexpected_exit == 0 && injected_nonzero && snell_ok;
    return r;
}

struct CriterionInfo {
    int number;
    const char* key;
    bool mc;
};

inline const std::vector<CriterionInfo>& criteria() {
    static const std::vector<CriterionInfo> list{
        {1, "martingale", false}, {2, "linear", false},      {3, "snell", false},       {4, "dynkin", false},
        {5, "penalization", false}, {6, "triple", false},    {7, "comparison", false},  {8, "convolution", false},
        {9, "mokobodzki", false}, {10, "montecarlo", true},  {11, "determinism", false}};
    return list;
}

inline bool selected(const CriterionInfo& c, const std::vector<std::string>& only) {
    if (only.empty()) {
        return true;
    }
    return std::any_of(only.begin(), only.end(),
                       [&](const std::string& s) { return s == c.key || s == std::to_string(c.number); });
}

} // namespace acceptance

inline const std::vector<std::string>& acceptance_suites() {
    static const std::vector<std::string> s{"core", "mc", "all"};
    return s;
}

/**
 * Runs a suite: "core" (everything but Monte Carlo), "mc" (criterion 10) or
 * "all". Unknown suites and filters that match nothing are errors; failing
 * criteria are not.
 */
inline AcceptanceSummary verify_suite(const std::string& suite, const AcceptanceOptions& opt = {}) {
    using namespace acceptance;
    if (std::find(acceptance_suites().begin(), acceptance_suites().end(), suite) == acceptance_suites().end()) {
        throw Error(ErrorCode::invalid_argument, "unknown suite '" + suite + "' (available: core, mc, all)");
    }
    std::vector<CriterionInfo> chosen;
    for (const auto& c : criteria()) {
        const bool in_suite = suite == "all" || (suite == "mc") == c.mc;
        if (in_suite && selected(c, opt.only)) {
            chosen.push_back(c);
        }
    }
    if (chosen.empty()) {
        std::string keys;
        for (const auto& c : criteria()) {
            keys += (keys.empty() ? "" : ", ") + std::string(c.key);
        }
        throw Error(ErrorCode::invalid_argument, "filter selects no criterion in suite '" + suite + "' (keys: " + keys + ")");
    }
    AcceptanceSummary out;
    out.suite = suite;
    std::optional<std::pair<FuzzOutcome, FuzzOutcome>> fuzz;
    auto need_fuzz = [&] {
        if (!fuzz) {
            fuzz = run_fuzz();
        }
        return *fuzz;
    };
    for (const auto& c : chosen) {
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            switch (c.number) {
            case 1: r = martingale(); break;
            case 2: r = linear_driver(); break;
            case 3: r = snell_criterion(need_fuzz().first); break;
            case 4: r = dynkin_criterion(need_fuzz().second); break;
            case 5: r = penalization(); break;
            case 6: r = triple_variant(); break;
            case 7: r = comparison(opt.threads); break;
            case 8: r = convolution_oracle(); break;
            case 9: r = mokobodzki_criterion(need_fuzz().first, need_fuzz().second); break;
            case 10: r = monte_carlo(opt.threads); break;
            default: r = determinism(opt.manifest_dir, opt.threads); break;
            }
        } catch (const std::exception& e) {
            r = CriterionResult{c.number, c.key, "", false, {std::string("error=") + e.what()}};
        }
        r.seconds = seconds_since(t0);
        if (opt.on_result) {
            opt.on_result(r);
        }
        out.results.push_back(std::move(r));
    }
    return out;
}

inline std::string format_result(const CriterionResult& r) {
    std::ostringstream s;
    s << (r.passed ? "PASS" : "FAIL") << "  " << r.number << " " << r.key << ": " << r.title << " (";
    s << std::fixed;
    s.precision(2);
    s << r.seconds << " s)";
    for (const auto& m : r.measured) {
        s << "\n        " << m;
    }
    return s.str();
}

} // namespace l1bsde
