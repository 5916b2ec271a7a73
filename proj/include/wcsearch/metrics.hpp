#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wcsearch/error.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/oracle.hpp"
#include "wcsearch/planner.hpp"

namespace wcsearch {

// Relative value error in percent: distance from the true worst case,
// normalized by the response's true range.
inline double rve(double found, double true_worst, double true_range) {
    if (!(true_range > 0.0)) throw DegenerateResponseError("relative value error needs a positive true range");
    return 100.0 * std::abs(found - true_worst) / true_range;
}

struct ResponseOutcome {
    std::optional<double> worst;  // raw response value, absent if nothing simulated
    std::optional<ConfigurationPoint> at;
    std::optional<Stage> stage;
    std::optional<double> rve;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::vector<ResponseOutcome> responses;
};

// Worst case per response over the records of one seed with stage <= `upto`.
inline SeedOutcome outcome_at(const CircuitModel& model, std::uint64_t seed, std::span<const SimulationRecord> records,
                              Stage upto, const std::vector<ResponseExtrema>* extrema = nullptr) {
    SeedOutcome out;
    out.seed = seed;
    for (std::size_t r = 0; r < model.specs().size(); ++r) {
        const auto& spec = model.specs()[r];
        ResponseOutcome ro;
        const SimulationRecord* worst = nullptr;
        for (const auto& rec : records) {
            if (rec.stage > upto) continue;
            if (!worst || oriented(spec, rec.responses[r]) < oriented(spec, worst->responses[r])) worst = &rec;
        }
        if (worst) {
            ro.worst = worst->responses[r];
            ro.at = worst->point;
            ro.stage = worst->stage;
            if (extrema) {
                const auto& e = (*extrema)[r];
                ro.rve = rve(*ro.worst, e.worst(spec).value, e.range());
            }
        }
        out.responses.push_back(std::move(ro));
    }
    return out;
}

namespace detail {

inline std::vector<double> collect_rves(std::span<const SeedOutcome> outcomes) {
    if (outcomes.empty()) throw ValidationError("no seed outcomes to aggregate");
    std::vector<double> v;
    for (const auto& o : outcomes)
        for (const auto& r : o.responses) {
            if (!r.rve) throw ValidationError("seed outcome lacks a relative value error (extrema unknown?)");
            v.push_back(*r.rve);
        }
    if (v.empty()) throw ValidationError("no relative value errors to aggregate");
    return v;
}

}  // namespace detail

// Mean of every per-seed, per-response RVE.
inline double arve(std::span<const SeedOutcome> outcomes) {
    const auto v = detail::collect_rves(outcomes);
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

// Maximum of every per-seed, per-response RVE.
inline double mrve(std::span<const SeedOutcome> outcomes) {
    const auto v = detail::collect_rves(outcomes);
    return *std::max_element(v.begin(), v.end());
}

struct Spread {
    double min = 0.0;
    double max = 0.0;
    double average = 0.0;
};

inline Spread summarize(std::span<const double> values) {
    if (values.empty()) throw ValidationError("summarize: no values");
    Spread s{values.front(), values.front(), 0.0};
    double sum = 0.0;
    for (double v : values) {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        sum += v;
    }
    s.average = std::clamp(sum / double(values.size()), s.min, s.max);
    return s;
}

}  // namespace wcsearch
