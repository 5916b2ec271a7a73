#include <iostream>

#include <CLI11.hpp>

#include "wcsearch/cli.hpp"

int main(int argc, char** argv) {
    using namespace wcsearch::cli;
    CLI::App app{"Surrogate-assisted worst-case search for analog circuit verification"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Fixed Planning followed by Adaptive Planning iterations");
    run_cmd->add_option("--circuit", run.circuit, "Circuit description file")->required();
    run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
    run_cmd->add_option("--seeds", run.seeds, "Number of seeds")->capture_default_str();
    run_cmd->add_option("--base-seed", run.base_seed, "First seed")->capture_default_str();
    run_cmd->add_option("--fp-budget", run.fp_budget, "Fixed Planning simulations")->capture_default_str();
    run_cmd->add_option("--ap-iterations", run.ap_iterations, "Adaptive Planning iterations")->capture_default_str();
    run_cmd->add_option("--eval-target", run.eval_target, "Evaluation set size")->capture_default_str();
    run_cmd->add_option("--kappa", run.kappa, "LCB exploration weight")->capture_default_str();
    run_cmd->add_option("--restarts", run.restarts, "GP hyperparameter restarts")->capture_default_str();
    run_cmd->add_option("--kernel", run.kernel, "matern52 or squared_exp")->capture_default_str();
    run_cmd->add_option("--jobs", run.jobs, "Concurrent seeds (0 = all cores)")->capture_default_str();
    run_cmd->add_option("--extrema", run.extrema, "Oracle extrema file for ARVE/MRVE");

    OracleCliOptions oracle;
    auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force true extrema of a synthetic circuit");
    oracle_cmd->add_option("--circuit", oracle.circuit, "Circuit description file")->required();
    oracle_cmd->add_option("--out", oracle.out, "Output directory")->capture_default_str();
    oracle_cmd->add_option("--density", oracle.density, "Initial grid points per OC")->capture_default_str();
    oracle_cmd->add_option("--max-density", oracle.max_density, "Largest grid tried")->capture_default_str();
    oracle_cmd->add_option("--tolerance", oracle.tolerance, "Stability tolerance, relative to range")
        ->capture_default_str();

    ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Regenerate the summary from a stored run log");
    report_cmd->add_option("--circuit", report.circuit, "Circuit description file")->required();
    report_cmd->add_option("--log", report.log, "Run log (log.csv)")->required();
    report_cmd->add_option("--extrema", report.extrema, "Oracle extrema file for ARVE/MRVE");
    report_cmd->add_option("--out", report.out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    if (*run_cmd) return cmd_run(run, std::cout, std::cerr);
    if (*oracle_cmd) return cmd_oracle(oracle, std::cout, std::cerr);
    return cmd_report(report, std::cout, std::cerr);
}
