#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "l1bsde/manifest.hpp"
#include "l1bsde/runner.hpp"

using namespace l1bsde;
namespace fs = std::filesystem;

namespace {

const char* snell_text = R"({
  "version": 1,
  "name": "snell_small",
  "model": {"T": 1.0, "n_steps": 8},
  "data": {"xi": "B^2", "L": "0.5", "clip_terminal_barriers": true},
  "scheme": {"kind": "direct"},
  "expect": [{"metric": "y0", "op": ">=", "value": 1.0}]
})";

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("l1bsde_test_" + name);
    fs::remove_all(p);
    return p;
}

ErrorCode code_of(const std::string& text) {
    try {
        parse_manifest(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::invalid_argument;
}

std::string replaced(std::string s, const std::string& from, const std::string& to) {
    s.replace(s.find(from), from.size(), to);
    return s;
}

} // namespace

TEST(Manifest, RoundTrip) {
    const auto m = parse_manifest(snell_text);
    const auto text = serialize_manifest(m);
    EXPECT_EQ(parse_manifest(text), m);
    EXPECT_EQ(serialize_manifest(parse_manifest(text)), text);
}

TEST(Manifest, RejectsBadInput) {
    EXPECT_EQ(code_of(replaced(snell_text, "\"name\"", "\"nmae\"")), ErrorCode::validation_error);
    EXPECT_EQ(code_of(replaced(snell_text, "\"name\": \"snell_small\",", "")), ErrorCode::validation_error);
    EXPECT_EQ(code_of(replaced(snell_text, "\"op\": \">=\"", "\"op\": \"~\"")), ErrorCode::validation_error);
    EXPECT_EQ(code_of(replaced(snell_text, "\"scheme\": {\"kind\": \"direct\"}",
                               "\"scheme\": {\"kind\": \"ladder\", \"variant\": \"lower\"}, \"schedule\": [4, 2]")),
              ErrorCode::validation_error);
    try {
        parse_manifest("{\"version\": 1,, }");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.position(), 15U);
    }
}

TEST(Runner, CrossedBarriersAreAValidationError) {
    auto m = parse_manifest(snell_text);
    m.data.U = "0.25";
    m.data.clip_terminal_barriers = false;
    m.data.xi = "0.4";
    m.data.L = "0.3 + B";
    RunOptions opt;
    opt.write_outputs = false;
    try {
        run_manifest(m, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation_error);
        EXPECT_NE(std::string(e.what()).find("data.L/data.U"), std::string::npos) << e.what();
    }
}

TEST(Runner, DeterministicDigestsAndOutputs) {
    const auto dir = scratch("det");
    RunOptions opt;
    opt.out_dir = dir.string();
    const auto a = run_manifest(parse_manifest(snell_text), opt);
    const auto b = run_manifest(parse_manifest(snell_text), opt);
    EXPECT_EQ(a.exit_code(), 0);
    EXPECT_EQ(a.result_digest, b.result_digest);
    EXPECT_EQ(a.manifest_hash, b.manifest_hash);
    EXPECT_EQ(a.input_digest.size(), 40U);
    EXPECT_TRUE(fs::exists(dir / "snell_small" / "record.json"));
    EXPECT_TRUE(fs::exists(dir / "snell_small" / "steps.csv"));
    std::ifstream in(dir / "snell_small" / "manifest.canonical.json");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(sha256_hex(ss.str()), a.manifest_hash);
    fs::remove_all(dir);
}

TEST(Runner, OutputDirectoryPrecedence) {
    auto m = parse_manifest(snell_text);
    ::setenv("L1BSDE_OUT_DIR", "from_env", 1);
    EXPECT_EQ(resolve_out_dir(m, RunOptions{}), "from_env");
    m.outputs.directory = "from_manifest";
    EXPECT_EQ(resolve_out_dir(m, RunOptions{}), "from_manifest");
    RunOptions opt;
    opt.out_dir = "from_cli";
    EXPECT_EQ(resolve_out_dir(m, opt), "from_cli");
    ::unsetenv("L1BSDE_OUT_DIR");
    m.outputs.directory.clear();
    EXPECT_EQ(resolve_out_dir(m, RunOptions{}), "out");
}

TEST(Runner, ExitCodes) {
    RunOptions opt;
    opt.write_outputs = false;
    auto m = parse_manifest(snell_text);
    EXPECT_EQ(run_manifest(m, opt).exit_code(), 0);
    m.expect[0].value = 100.0;
    EXPECT_EQ(run_manifest(m, opt).exit_code(), 1);
    m.expect[0].metric = "no_such_metric";
    const auto r = run_manifest(m, opt);
    EXPECT_EQ(r.exit_code(), 1);
    EXPECT_FALSE(r.assertions[0].actual.has_value());
    // A contraction failure is a run error, not a validation error.
    m.expect.clear();
    m.model.n_steps = 1;
    m.data.L = "none";
    m.data.clip_terminal_barriers = false;
    m.generator.catalog.clear();
    m.generator.expr = "8*y";
    m.generator.linear_growth = 8.0;
    EXPECT_EQ(run_manifest(m, opt).exit_code(), 2);
}

TEST(Runner, GoldenColumns) {
    RunOptions opt;
    opt.write_outputs = false;
    const auto r = run_manifest(parse_manifest(snell_text), opt);
    ASSERT_FALSE(r.tables.empty());
    EXPECT_EQ(r.tables[0].name, "steps");
    EXPECT_EQ(r.tables[0].columns, (std::vector<std::string>{"step", "t", "y_mean", "y_min", "y_max", "dk_mean",
                                                             "da_mean", "residual", "iterations"}));
    auto m = parse_manifest(snell_text);
    m.scheme.kind = "ladder";
    m.scheme.variant = "lower";
    m.schedule = {1, 4};
    m.expect.clear();
    const auto l = run_manifest(m, opt);
    ASSERT_FALSE(l.tables.empty());
    EXPECT_EQ(l.tables[0].columns, (std::vector<std::string>{"n", "y0", "sup_y", "s_beta_y", "m_beta_z", "s_beta_k",
                                                              "s_beta_a", "sup_k", "sup_a", "k_total", "a_total"}));
}

TEST(Digests, KnownValues) {
    EXPECT_EQ(git_blob_id(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
