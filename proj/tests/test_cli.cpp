#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "test_support.hpp"
#include "wcsearch/cli.hpp"

using namespace wcsearch;
using namespace wcsearch::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(::testing::TempDir()) / ("wcsearch_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunOptions small_run(const std::string& circuit, const fs::path& out) {
    RunOptions o;
    o.circuit = circuit;
    o.out = out.string();
    o.seeds = 2;
    o.fp_budget = 16;
    o.ap_iterations = 2;
    o.eval_target = 300;
    o.restarts = 2;
    o.jobs = 2;
    return o;
}

std::string synth2_path() { return wcsearch::testing::source_path("circuits/synth2.toml"); }

// Copy of synth2 with a different GM threshold.
std::string synth2_with_gm_threshold(const fs::path& dir, const std::string& threshold) {
    std::string text = read_file(synth2_path());
    const std::string from = "threshold = 8.0";
    text.replace(text.find(from), from.size(), "threshold = " + threshold);
    const auto path = (dir / "circuit.toml").string();
    write_file(path, text);
    return path;
}

int shell(const std::string& command) {
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(CliRun, WritesArtifactsAndIsReproducible) {
    const auto a = scratch("run_a"), b = scratch("run_b");
    const std::string before = read_file(synth2_path());
    std::ostringstream out, err;
    const int code_a = cmd_run(small_run(synth2_path(), a), out, err);
    const int code_b = cmd_run(small_run(synth2_path(), b), out, err);
    EXPECT_EQ(code_a, kExitOk) << err.str();
    EXPECT_EQ(code_b, kExitOk);
    for (const char* f : {"log.csv", "summary.txt", "report.json"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(read_file((a / f).string()), read_file((b / f).string())) << f;
    }
    EXPECT_EQ(read_file(synth2_path()), before);
    const auto summary = read_file((a / "summary.txt").string());
    EXPECT_NE(summary.find("simulations = 44"), std::string::npos) << summary;
    EXPECT_NE(summary.find("GM,AP2,"), std::string::npos);
}

TEST(CliRun, FixedPlanningOnly) {
    const auto dir = scratch("fp_only");
    auto o = small_run(synth2_path(), dir);
    o.ap_iterations = 0;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_run(o, out, err), kExitOk) << err.str();
    const auto summary = read_file((dir / "summary.txt").string());
    EXPECT_NE(summary.find("GM,FP,"), std::string::npos);
    EXPECT_EQ(summary.find("AP1"), std::string::npos);
}

TEST(CliRun, ViolationExitCode) {
    const auto dir = scratch("violation");
    const auto circuit = synth2_with_gm_threshold(dir, "12.0");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_run(small_run(circuit, dir / "out"), out, err), kExitViolation) << err.str();
    const auto summary = read_file((dir / "out" / "summary.txt").string());
    EXPECT_EQ(summary.find("count = 0"), std::string::npos);
    EXPECT_NE(summary.find(",GM,"), std::string::npos);
}

TEST(CliRun, BadConfigurationNamesField) {
    const auto dir = scratch("bad");
    auto o = small_run(synth2_path(), dir / "out");
    o.fp_budget = 4;
    std::ostringstream out, err;
    EXPECT_EQ(cmd_run(o, out, err), kExitError);
    EXPECT_NE(err.str().find("fp-budget"), std::string::npos) << err.str();
    EXPECT_FALSE(fs::exists(dir / "out"));
    o = small_run(synth2_path(), dir / "out");
    o.kernel = "rbf";
    EXPECT_EQ(cmd_run(o, out, err), kExitError);
    o = small_run((dir / "missing.toml").string(), dir / "out");
    EXPECT_EQ(cmd_run(o, out, err), kExitError);
}

TEST(CliOracle, ExtremaFileDeterministic) {
    const auto a = scratch("oracle_a"), b = scratch("oracle_b");
    std::ostringstream out, err;
    OracleCliOptions o;
    o.circuit = synth2_path();
    o.out = a.string();
    ASSERT_EQ(cmd_oracle(o, out, err), kExitOk) << err.str();
    o.out = b.string();
    ASSERT_EQ(cmd_oracle(o, out, err), kExitOk);
    const auto text = read_file((a / "extrema.csv").string());
    EXPECT_EQ(text, read_file((b / "extrema.csv").string()));
    std::istringstream in(text);
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.starts_with('#') && !line.starts_with("response,")) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(CliOracle, RefusesExternalAndUnstableGrids) {
    const auto dir = scratch("oracle_bad");
    std::ostringstream out, err;
    OracleCliOptions o;
    o.circuit = wcsearch::testing::source_path("circuits/l2_external.toml");
    o.out = dir.string();
    EXPECT_EQ(cmd_oracle(o, out, err), kExitError);
    EXPECT_NE(err.str().find("synthetic"), std::string::npos);
    o.circuit = synth2_path();
    o.density = 2;
    o.max_density = 2;
    EXPECT_EQ(cmd_oracle(o, out, err), kExitError);
    EXPECT_FALSE(fs::exists(dir / "extrema.csv"));
}

TEST(CliReport, RegeneratesSummaryFromLog) {
    const auto dir = scratch("report");
    std::ostringstream out, err;
    OracleCliOptions oracle;
    oracle.circuit = synth2_path();
    oracle.out = dir.string();
    ASSERT_EQ(cmd_oracle(oracle, out, err), kExitOk);
    auto run = small_run(synth2_path(), dir / "run");
    run.extrema = (dir / "extrema.csv").string();
    ASSERT_EQ(cmd_run(run, out, err), kExitOk) << err.str();

    ReportOptions rep;
    rep.circuit = synth2_path();
    rep.log = (dir / "run" / "log.csv").string();
    rep.extrema = run.extrema;
    rep.out = (dir / "rep").string();
    ASSERT_EQ(cmd_report(rep, out, err), kExitOk) << err.str();
    EXPECT_EQ(read_file((dir / "rep" / "summary.txt").string()), read_file((dir / "run" / "summary.txt").string()));
    EXPECT_EQ(read_file((dir / "rep" / "report.json").string()), read_file((dir / "run" / "report.json").string()));
    EXPECT_NE(read_file((dir / "rep" / "summary.txt").string()).find("[metrics]"), std::string::npos);

    rep.extrema.reset();
    rep.out = (dir / "plain").string();
    ASSERT_EQ(cmd_report(rep, out, err), kExitOk);
    EXPECT_EQ(read_file((dir / "plain" / "summary.txt").string()).find("[metrics]"), std::string::npos);

    write_file((dir / "empty.csv").string(), "");
    rep.log = (dir / "empty.csv").string();
    EXPECT_EQ(cmd_report(rep, out, err), kExitError);
    rep.log = (dir / "absent.csv").string();
    EXPECT_EQ(cmd_report(rep, out, err), kExitError);
}

TEST(CliBinary, ExternalBackendThroughEnvironment) {
    const auto dir = scratch("binary_external");
    const std::string cmd = std::string("WCSEARCH_SIMULATOR='") + WCSEARCH_STUB_SIMULATOR + " fixture' " + WCSEARCH_CLI +
                            " run --circuit " + wcsearch::testing::source_path("circuits/l2_external.toml") +
                            " --out " + dir.string() + " --seeds 1 --fp-budget 8 --ap-iterations 1 --eval-target 200" +
                            " --restarts 1 > " + (dir / "stdout.txt").string() + " 2>&1";
    EXPECT_EQ(shell(cmd), kExitOk) << read_file((dir / "stdout.txt").string());
    const auto log = read_file((dir / "log.csv").string());
    std::istringstream in(log);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_NE(line.find(",9.8,30.81,-33.72,"), std::string::npos) << line;
    }
    EXPECT_EQ(rows, 8 + 3);
}

TEST(CliBinary, ExitCodes) {
    const auto dir = scratch("binary_codes");
    const std::string cli = WCSEARCH_CLI;
    EXPECT_EQ(shell(cli + " --help > /dev/null"), 0);
    EXPECT_EQ(shell(cli + " > /dev/null 2>&1"), 1);
    EXPECT_EQ(shell(cli + " run --bogus > /dev/null 2>&1"), 1);
    const auto circuit = synth2_with_gm_threshold(dir, "12.0");
    EXPECT_EQ(shell(cli + " run --circuit " + circuit + " --out " + (dir / "o").string() +
                    " --seeds 1 --fp-budget 16 --ap-iterations 1 --eval-target 200 --restarts 1 > /dev/null"),
              3);
}
