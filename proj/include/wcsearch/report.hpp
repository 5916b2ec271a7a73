#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wcsearch/format.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/metrics.hpp"
#include "wcsearch/oracle.hpp"
#include "wcsearch/planner.hpp"

namespace wcsearch {

// Run log columns: seed, stage, one per OC, the corner label (when the
// circuit has a corner), one per response, then margin_<response> for each.
inline std::vector<std::string> log_columns(const CircuitModel& model) {
    std::vector<std::string> cols{"seed", "stage"};
    for (const auto& oc : model.ocs()) cols.push_back(oc.name);
    if (model.corner()) cols.push_back(model.corner()->name());
    for (const auto& s : model.specs()) cols.push_back(s.name);
    for (const auto& s : model.specs()) cols.push_back("margin_" + s.name);
    return cols;
}

inline void write_log_csv(std::ostream& os, const CircuitModel& model, std::span<const SimulationRecord> records) {
    const auto cols = log_columns(model);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& rec : records) {
        os << rec.seed << ',' << stage_name(rec.stage);
        for (double v : rec.point.oc_values) os << ',' << format_double(v);
        if (model.corner()) os << ',' << model.corner_label(rec.point);
        for (double v : rec.responses) os << ',' << format_double(v);
        for (std::size_t r = 0; r < rec.responses.size(); ++r)
            os << ',' << format_double(margin(model.specs()[r], rec.responses[r]));
        os << '\n';
    }
}

inline std::vector<SimulationRecord> read_log_csv(std::istream& is, const CircuitModel& model) {
    const auto cols = log_columns(model);
    std::string line;
    if (!std::getline(is, line)) throw ParseError("run log is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split(line, ',') != cols) throw ParseError("run log columns do not match the circuit description");
    const std::size_t d = model.continuous_dims();
    const std::size_t nr = model.specs().size();
    std::vector<SimulationRecord> records;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != cols.size()) throw ParseError("run log row " + std::to_string(row) + " has wrong field count");
        try {
            SimulationRecord rec;
            std::size_t pos = 0;
            const double seed = parse_double(f[pos++]);
            if (seed < 0 || seed != std::floor(seed)) throw ParseError("bad seed");
            rec.seed = static_cast<std::uint64_t>(seed);
            rec.stage = parse_stage(f[pos++]);
            for (std::size_t i = 0; i < d; ++i) rec.point.oc_values.push_back(parse_double(f[pos++]));
            if (model.corner()) rec.point.corner = model.corner()->encode(f[pos++]);
            for (std::size_t r = 0; r < nr; ++r) rec.responses.push_back(parse_double(f[pos++]));
            model.validate(rec.point);
            records.push_back(std::move(rec));
        } catch (const Error& e) {
            throw ParseError("run log row " + std::to_string(row) + ": " + e.what());
        }
    }
    if (records.empty()) throw ParseError("run log has no simulations");
    return records;
}

struct StageRow {
    Stage stage = 0;
    std::vector<Spread> per_response;  // across seeds, raw response units
};

struct MetricsRow {
    Stage stage = 0;
    double arve = 0.0;
    double mrve = 0.0;
};

struct ViolationEntry {
    std::uint64_t seed = 0;
    Stage stage = 0;
    std::string response;
    double value = 0.0;
    double margin = 0.0;
    ConfigurationPoint at;
};

// Everything the summary files report, built from simulation records only
// so that a stored log regenerates the same summary.
struct RunSummary {
    std::string circuit;
    std::vector<std::string> responses;
    std::vector<std::uint64_t> seeds;
    std::vector<std::uint64_t> failed_seeds;
    std::vector<std::string> faults;
    std::size_t simulations = 0;
    Stage final_stage = 0;
    std::vector<StageRow> table;                    // FP, AP1, final AP
    std::vector<std::vector<SeedOutcome>> outcomes;  // [stage][seed], every stage
    std::vector<MetricsRow> metrics;               // every stage, when extrema are known
    std::vector<ViolationEntry> violations;

    bool violated() const noexcept { return !violations.empty(); }
};

inline RunSummary build_summary(const CircuitModel& model, std::span<const SimulationRecord> records,
                                const std::vector<ResponseExtrema>* extrema = nullptr,
                                std::vector<std::uint64_t> failed_seeds = {}, std::vector<std::string> faults = {}) {
    RunSummary s;
    s.circuit = model.name();
    for (const auto& spec : model.specs()) s.responses.push_back(spec.name);
    s.failed_seeds = std::move(failed_seeds);
    s.faults = std::move(faults);
    std::map<std::uint64_t, std::vector<SimulationRecord>> by_seed;
    for (const auto& rec : records) {
        if (std::find(s.failed_seeds.begin(), s.failed_seeds.end(), rec.seed) != s.failed_seeds.end()) continue;
        by_seed[rec.seed].push_back(rec);
        s.final_stage = std::max(s.final_stage, rec.stage);
    }
    for (const auto& [seed, recs] : by_seed) {
        s.seeds.push_back(seed);
        s.simulations += recs.size();
        for (const auto& rec : recs)
            for (std::size_t r = 0; r < model.specs().size(); ++r) {
                const double m = margin(model.specs()[r], rec.responses[r]);
                if (m <= 0.0) s.violations.push_back({seed, rec.stage, model.specs()[r].name, rec.responses[r], m, rec.point});
            }
    }
    for (Stage st = 0; st <= s.final_stage; ++st) {
        std::vector<SeedOutcome> at_stage;
        for (const auto& [seed, recs] : by_seed) at_stage.push_back(outcome_at(model, seed, recs, st, extrema));
        s.outcomes.push_back(std::move(at_stage));
    }
    std::vector<Stage> table_stages{0};
    if (s.final_stage >= 1) table_stages.push_back(1);
    if (s.final_stage > 1) table_stages.push_back(s.final_stage);
    for (Stage st : table_stages) {
        StageRow row;
        row.stage = st;
        for (std::size_t r = 0; r < model.specs().size(); ++r) {
            std::vector<double> values;
            for (const auto& o : s.outcomes[st])
                if (o.responses[r].worst) values.push_back(*o.responses[r].worst);
            row.per_response.push_back(values.empty() ? Spread{} : summarize(values));
        }
        s.table.push_back(std::move(row));
    }
    if (extrema && !by_seed.empty())
        for (Stage st = 0; st <= s.final_stage; ++st)
            s.metrics.push_back({st, arve(s.outcomes[st]), mrve(s.outcomes[st])});
    return s;
}

inline constexpr const char* kSummaryHeader = "# wcsearch summary v1";

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? " " : "") + std::to_string(seeds[i]);
    return out;
}

inline void write_summary_text(std::ostream& os, const CircuitModel& model, const RunSummary& s) {
    os << kSummaryHeader << '\n';
    os << "circuit = " << s.circuit << '\n';
    os << "seeds = " << join_seeds(s.seeds) << '\n';
    os << "failed_seeds = " << join_seeds(s.failed_seeds) << '\n';
    os << "simulations = " << s.simulations << '\n';
    os << "final_stage = " << stage_name(s.final_stage) << '\n';
    os << "\n[worst_case]\n";
    os << "response,stage,min,max,average\n";
    for (std::size_t r = 0; r < s.responses.size(); ++r)
        for (const auto& row : s.table) {
            const auto& sp = row.per_response[r];
            os << s.responses[r] << ',' << stage_name(row.stage) << ',' << format_fixed(sp.min, 4) << ','
               << format_fixed(sp.max, 4) << ',' << format_fixed(sp.average, 4) << '\n';
        }
    os << "\n[violations]\n";
    os << "count = " << s.violations.size() << '\n';
    if (!s.violations.empty()) {
        os << "seed,stage,response,value,margin,occ\n";
        for (const auto& v : s.violations)
            os << v.seed << ',' << stage_name(v.stage) << ',' << v.response << ',' << format_double(v.value) << ','
               << format_double(v.margin) << ',' << format_point(model, v.at) << '\n';
    }
    if (!s.metrics.empty()) {
        os << "\n[metrics]\n";
        os << "stage,arve_percent,mrve_percent\n";
        for (const auto& m : s.metrics)
            os << stage_name(m.stage) << ',' << format_fixed(m.arve, 2) << ',' << format_fixed(m.mrve, 2) << '\n';
    }
    if (!s.faults.empty()) {
        os << "\n[faults]\n";
        for (const auto& f : s.faults) os << f << '\n';
    }
}

inline nlohmann::ordered_json summary_json(const CircuitModel& model, const RunSummary& s) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "wcsearch-report";
    j["version"] = 1;
    j["circuit"] = s.circuit;
    j["seeds"] = s.seeds;
    j["failed_seeds"] = s.failed_seeds;
    j["simulations"] = s.simulations;
    j["final_stage"] = stage_name(s.final_stage);
    ordered_json table = ordered_json::object();
    for (std::size_t r = 0; r < s.responses.size(); ++r) {
        ordered_json rows = ordered_json::object();
        for (const auto& row : s.table) {
            const auto& sp = row.per_response[r];
            rows[stage_name(row.stage)] = {{"min", sp.min}, {"max", sp.max}, {"average", sp.average}};
        }
        table[s.responses[r]] = rows;
    }
    j["worst_case"] = table;
    ordered_json per_seed = ordered_json::array();
    if (!s.outcomes.empty())
        for (const auto& o : s.outcomes.back()) {
            ordered_json entry;
            entry["seed"] = o.seed;
            for (std::size_t r = 0; r < s.responses.size(); ++r) {
                const auto& ro = o.responses[r];
                ordered_json item;
                if (ro.worst) {
                    item["worst"] = *ro.worst;
                    item["stage"] = stage_name(*ro.stage);
                    item["occ"] = format_point(model, *ro.at);
                }
                if (ro.rve) item["rve_percent"] = *ro.rve;
                entry[s.responses[r]] = item;
            }
            per_seed.push_back(entry);
        }
    j["per_seed"] = per_seed;
    ordered_json viol = ordered_json::array();
    for (const auto& v : s.violations)
        viol.push_back({{"seed", v.seed},
                        {"stage", stage_name(v.stage)},
                        {"response", v.response},
                        {"value", v.value},
                        {"margin", v.margin},
                        {"occ", format_point(model, v.at)}});
    j["violations"] = viol;
    if (!s.metrics.empty()) {
        ordered_json m = ordered_json::array();
        for (const auto& row : s.metrics)
            m.push_back({{"stage", stage_name(row.stage)}, {"arve_percent", row.arve}, {"mrve_percent", row.mrve}});
        j["metrics"] = m;
    }
    j["faults"] = s.faults;
    return j;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ReportPaths {
    std::string log;
    std::string summary;
    std::string json;
};

// Writes summary.txt and report.json into `dir`, plus log.csv when records
// are given.
inline ReportPaths emit_report(const std::string& dir, const CircuitModel& model, const RunSummary& summary,
                               std::span<const SimulationRecord> records = {}) {
    ReportPaths paths{dir + "/log.csv", dir + "/summary.txt", dir + "/report.json"};
    if (!records.empty()) {
        std::ostringstream log;
        write_log_csv(log, model, records);
        write_file(paths.log, log.str());
    }
    std::ostringstream text;
    write_summary_text(text, model, summary);
    write_file(paths.summary, text.str());
    write_file(paths.json, summary_json(model, summary).dump(2) + "\n");
    return paths;
}

}  // namespace wcsearch
