#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wcsearch/circuit_file.hpp"
#include "wcsearch/external_simulator.hpp"
#include "wcsearch/oracle.hpp"
#include "wcsearch/planner.hpp"
#include "wcsearch/report.hpp"

namespace wcsearch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolation = 3;

struct RunOptions {
    std::string circuit;
    std::string out = "wcsearch-out";
    std::size_t seeds = 10;
    std::uint64_t base_seed = 0;
    std::size_t fp_budget = 100;
    std::size_t ap_iterations = 10;
    std::size_t eval_target = kDefaultEvaluationTarget;
    double kappa = 2.0;
    std::size_t restarts = 8;
    std::string kernel = "matern52";
    std::size_t jobs = 0;
    std::optional<std::string> extrema;
};

struct OracleCliOptions {
    std::string circuit;
    std::string out = "wcsearch-out";
    std::size_t density = 9;
    std::size_t max_density = 33;
    double tolerance = 1e-3;
};

struct ReportOptions {
    std::string circuit;
    std::string log;
    std::optional<std::string> extrema;
    std::string out = "wcsearch-out";
};

inline CircuitFile load_circuit(const std::string& path) {
    try {
        return parse_circuit(read_file(path));
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

inline std::vector<ResponseExtrema> load_extrema(const std::string& path, const CircuitModel& model) {
    std::istringstream in(read_file(path));
    try {
        return read_extrema(in, model);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

inline RunConfig make_config(const RunOptions& o) {
    RunConfig c;
    if (o.seeds == 0) throw ValidationError("--seeds must be >= 1");
    c.seeds.clear();
    for (std::size_t i = 0; i < o.seeds; ++i) c.seeds.push_back(o.base_seed + i);
    c.fp_budget = o.fp_budget;
    c.ap_iterations = o.ap_iterations;
    c.eval_target = o.eval_target;
    c.kappa = o.kappa;
    c.fit.restarts = o.restarts;
    if (o.kernel == "matern52")
        c.kernel = KernelKind::Matern52;
    else if (o.kernel == "squared_exp")
        c.kernel = KernelKind::SquaredExp;
    else
        throw ValidationError("--kernel must be matern52 or squared_exp");
    c.jobs = o.jobs;
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("invalid run configuration: ") + e.what());
    }
    return c;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

// Executes the run and writes log.csv, summary.txt and report.json under
// `o.out`. Exit 0: no violation; 3: violation found; 1: error.
inline int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
    try {
        const RunConfig config = make_config(o);
        const CircuitFile file = load_circuit(o.circuit);
        std::optional<std::vector<ResponseExtrema>> extrema;
        if (o.extrema) extrema = load_extrema(*o.extrema, file.model);
        ensure_dir(o.out);

        RunResult result;
        if (file.model.backend() == Backend::Synthetic) {
            const SyntheticCircuit sim = file.synthetic();
            result = run(file.model, sim, config);
        } else {
            if (file.external.command.empty())
                throw ValidationError(std::string("external backend needs [external] command or ") + kSimulatorEnv);
            ExternalSimulator sim(file.model, file.external.command, file.external.timeout);
            result = run(file.model, sim, config);
        }

        std::vector<SimulationRecord> records;
        std::vector<std::uint64_t> failed;
        std::vector<std::string> faults;
        for (const auto& s : result.seeds) {
            records.insert(records.end(), s.records.begin(), s.records.end());
            if (s.failed) failed.push_back(s.seed);
            for (const auto& f : s.faults) faults.push_back("seed " + std::to_string(s.seed) + " " + f);
        }
        const RunSummary summary =
            build_summary(file.model, records, extrema ? &*extrema : nullptr, failed, faults);
        const auto paths = emit_report(o.out, file.model, summary, records);
        out << "wrote " << paths.log << ", " << paths.summary << ", " << paths.json << '\n';
        out << summary.simulations << " simulations over " << summary.seeds.size() << " seed(s)";
        if (!failed.empty()) out << ", " << failed.size() << " failed";
        out << "; " << summary.violations.size() << " violation(s)\n";
        return summary.violated() ? kExitViolation : kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

inline int cmd_oracle(const OracleCliOptions& o, std::ostream& out, std::ostream& err) {
    try {
        const CircuitFile file = load_circuit(o.circuit);
        if (file.model.backend() != Backend::Synthetic)
            throw UnsupportedBackendError("oracle extrema are only available for the synthetic backend");
        OracleOptions opts;
        opts.grid_density = o.density;
        opts.max_density = o.max_density;
        opts.tolerance = o.tolerance;
        const OracleResult result = oracle_extrema(file.synthetic(), opts);
        ensure_dir(o.out);
        std::ostringstream text;
        write_extrema(text, file.model, result);
        const std::string path = o.out + "/extrema.csv";
        write_file(path, text.str());
        out << "wrote " << path << " (grid density " << result.density << ")\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

inline int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
    try {
        const CircuitFile file = load_circuit(o.circuit);
        std::istringstream log(read_file(o.log));
        const auto records = read_log_csv(log, file.model);
        std::optional<std::vector<ResponseExtrema>> extrema;
        if (o.extrema) extrema = load_extrema(*o.extrema, file.model);
        ensure_dir(o.out);
        const RunSummary summary = build_summary(file.model, records, extrema ? &*extrema : nullptr);
        const auto paths = emit_report(o.out, file.model, summary);
        out << "wrote " << paths.summary << ", " << paths.json << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace wcsearch::cli
