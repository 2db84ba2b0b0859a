// Command-line front end: run manifests, verify acceptance suites, list the generator catalog.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "l1bsde/acceptance.hpp"
#include "l1bsde/catalog.hpp"
#include "l1bsde/runner.hpp"

namespace {

int do_run(const std::string& file, const l1bsde::RunOptions& opt) {
    const auto rec = l1bsde::run_manifest_file(file, opt);
    std::cout << "name            " << rec.name << "\n"
              << "manifest_hash   " << rec.manifest_hash << "\n"
              << "input_digest    " << rec.input_digest << "\n"
              << "result_digest   " << rec.result_digest << "\n";
    for (const auto& [k, v] : rec.scalars) {
        std::printf("%-40s %s\n", k.c_str(), l1bsde::format_number(v).c_str());
    }
    for (const auto& a : rec.assertions) {
        std::printf("assert %-33s %s %s: %s\n", a.expectation.metric.c_str(), a.expectation.op.c_str(),
                    l1bsde::format_number(a.expectation.value).c_str(), a.passed ? "pass" : "FAIL");
    }
    if (!rec.error.empty()) {
        std::cerr << "error: " << rec.error << "\n";
    }
    if (!rec.output_dir.empty()) {
        std::cout << "outputs         " << rec.output_dir << "\n";
    }
    return rec.exit_code();
}

int do_verify(const std::string& suite, const std::vector<std::string>& only, const std::string& manifests,
              std::size_t threads) {
    l1bsde::AcceptanceOptions opt;
    opt.only = only;
    opt.threads = threads;
    if (!manifests.empty()) {
        opt.manifest_dir = manifests;
    }
    opt.on_result = [](const l1bsde::CriterionResult& r) { std::cout << l1bsde::format_result(r) << std::endl; };
    const auto s = l1bsde::verify_suite(suite, opt);
    std::cout << "suite " << s.suite << ": " << s.passed() << "/" << s.results.size() << " criteria passed\n";
    return s.all_passed() ? 0 : 1;
}

int do_catalog(const std::string& filter) {
    const auto entries = l1bsde::list_catalog(filter);
    if (entries.empty()) {
        std::cout << "no catalog entry matches '" << filter << "'\n";
        return 0;
    }
    std::printf("%-12s %-28s %s\n", "id", "classes", "parameters");
    for (const auto& e : entries) {
        std::string classes;
        for (auto c : e.spec.declared()) {
            classes += (classes.empty() ? "" : ",") + std::string(l1bsde::to_string(c));
        }
        std::printf("%-12s %-28s %s\n", e.spec.id().c_str(), classes.c_str(), e.parameters.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"L1 BSDE solver: lattice and Monte Carlo backends, reflected solvers, analysis batteries"};
    app.require_subcommand(1);

    std::string out_dir;
    std::optional<std::size_t> threads;
    std::optional<double> beta;
    std::optional<double> tol;
    app.add_option("--out-dir", out_dir, "Output directory (overrides the manifest and $L1BSDE_OUT_DIR)");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--beta", beta, "Norm exponent in (0,1)");
    app.add_option("--tol", tol, "Fixed-point tolerance")->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "Run an experiment manifest");
    std::string file;
    bool quiet = false;
    run->add_option("file", file, "Manifest path")->required();
    run->add_flag("--quiet", quiet, "No progress lines on stderr");

    auto* verify = app.add_subcommand("verify", "Run an acceptance suite (core, mc, all)");
    std::string suite;
    std::vector<std::string> only;
    std::string manifests;
    verify->add_option("suite", suite, "Suite id")->required();
    verify->add_option("--only", only, "Criterion keys or numbers to run")->delimiter(',');
    verify->add_option("--manifests", manifests, "Directory of bundled manifests for the determinism check");

    auto* cat = app.add_subcommand("catalog", "List generator catalog entries");
    std::string filter;
    cat->add_option("filter", filter, "Substring of the id");

    // Global flags are accepted after the subcommand too.
    for (auto* sub : {run, verify, cat}) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            l1bsde::RunOptions opt;
            opt.out_dir = out_dir;
            opt.threads = threads;
            opt.beta = beta;
            opt.tol = tol;
            if (!quiet) {
                opt.progress = [](const std::string& s) { std::cerr << s << std::endl; };
            }
            return do_run(file, opt);
        }
        if (*verify) {
            return do_verify(suite, only, manifests, threads.value_or(1));
        }
        return do_catalog(filter);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
