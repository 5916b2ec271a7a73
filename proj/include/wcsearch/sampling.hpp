#pragma once

#include <bit>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wcsearch/error.hpp"
#include "wcsearch/format.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/random.hpp"

namespace wcsearch {

enum class Provenance { FullFactorial, LHS, OA };

inline const char* to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::FullFactorial: return "FF";
        case Provenance::LHS: return "LHS";
        case Provenance::OA: return "OA";
    }
    return "?";
}

struct DesignSet {
    std::vector<ConfigurationPoint> points;
    std::vector<Provenance> provenance;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }

    void append(const DesignSet& other) {
        points.insert(points.end(), other.points.begin(), other.points.end());
        provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
    }

    // One row per point, in normalized coordinates.
    Eigen::MatrixXd normalized(const CircuitModel& model) const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(model.dimension()));
        for (std::size_t i = 0; i < points.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = model.normalize(points[i]);
        return x;
    }
};

inline constexpr std::uint64_t kFullFactorialCap = std::uint64_t{1} << 20;

namespace detail {

// Assigns corner codes cyclically over the valid labels, starting at `offset`.
inline void assign_corners_round_robin(const CircuitModel& model, DesignSet& set, std::size_t offset = 0) {
    if (!model.corner()) return;
    const auto codes = model.corner()->valid_codes();
    for (std::size_t i = 0; i < set.points.size(); ++i) set.points[i].corner = codes[(offset + i) % codes.size()];
}

// Keeps the first occurrence of each normalized point.
inline void deduplicate(const CircuitModel& model, DesignSet& set) {
    std::set<std::vector<double>> seen;
    DesignSet out;
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        const Eigen::VectorXd u = model.normalize(set.points[i]);
        if (seen.insert(std::vector<double>(u.data(), u.data() + u.size())).second) {
            out.points.push_back(set.points[i]);
            out.provenance.push_back(set.provenance[i]);
        }
    }
    set = std::move(out);
}

inline std::uint64_t checked_power(std::uint64_t base, std::size_t exp, std::uint64_t cap) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r > cap / base) return cap + 1;
        r *= base;
    }
    return r;
}

}  // namespace detail

// All levels^d combinations of evenly spaced levels on each continuous dim.
inline DesignSet full_factorial(const CircuitModel& model, std::size_t levels, std::uint64_t cap = kFullFactorialCap) {
    if (levels < 2) throw ValidationError("full factorial needs at least 2 levels");
    const std::size_t d = model.continuous_dims();
    const std::uint64_t count = detail::checked_power(levels, d, cap);
    if (count > cap)
        throw BudgetError("full factorial " + std::to_string(levels) + "^" + std::to_string(d) + " exceeds cap of " +
                          std::to_string(cap) + " points");
    DesignSet set;
    set.points.reserve(count);
    std::vector<std::size_t> digit(d, 0);
    for (std::uint64_t n = 0; n < count; ++n) {
        ConfigurationPoint p;
        p.oc_values.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            const auto& oc = model.ocs()[j];
            p.oc_values[j] = digit[j] == 0             ? oc.min
                             : digit[j] == levels - 1 ? oc.max
                                                       : oc.min + (oc.max - oc.min) * double(digit[j]) / double(levels - 1);
        }
        set.points.push_back(std::move(p));
        set.provenance.push_back(Provenance::FullFactorial);
        for (std::size_t j = 0; j < d; ++j) {
            if (++digit[j] < levels) break;
            digit[j] = 0;
        }
    }
    detail::assign_corners_round_robin(model, set);
    return set;
}

// Each of the n equal-width strata of every continuous dimension holds exactly
// one sample. Samples sit strictly inside their stratum.
inline DesignSet latin_hypercube(const CircuitModel& model, std::size_t n, Rng& rng) {
    if (n == 0) throw ValidationError("latin hypercube with zero samples is an empty design");
    const std::size_t d = model.continuous_dims();
    DesignSet set;
    set.points.assign(n, ConfigurationPoint{std::vector<double>(d), std::nullopt});
    set.provenance.assign(n, Provenance::LHS);
    std::vector<std::size_t> strata(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(strata));
        const auto& oc = model.ocs()[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double jitter = 0.001 + 0.998 * rng.uniform();
            const double t = (double(strata[i]) + jitter) / double(n);
            set.points[i].oc_values[j] = oc.min + t * (oc.max - oc.min);
        }
    }
    detail::assign_corners_round_robin(model, set);
    return set;
}

// Smallest two-level strength-2 array (power-of-two runs) for d factors.
inline std::size_t minimum_oa_runs(std::size_t d) noexcept { return std::bit_ceil(std::max<std::size_t>(4, d + 1)); }

// Two-level strength-2 orthogonal array from the Sylvester-Hadamard matrix:
// the entry of row i, column j is -1 iff popcount(i & j) is odd. Columns
// 1..d are used; -1 maps to the OC max and +1 to its min.
inline DesignSet orthogonal_array(const CircuitModel& model, std::size_t runs) {
    const std::size_t d = model.continuous_dims();
    const std::size_t need = minimum_oa_runs(d);
    if (runs < need || !std::has_single_bit(runs)) {
        const std::size_t next = std::bit_ceil(std::max(runs, need));
        throw CapabilityError("no two-level strength-2 array with " + std::to_string(runs) + " runs for " +
                                  std::to_string(d) + " factors; next constructible size is " + std::to_string(next),
                              next);
    }
    DesignSet set;
    for (std::size_t i = 0; i < runs; ++i) {
        ConfigurationPoint p;
        p.oc_values.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            const bool high = std::popcount(i & (j + 1)) % 2 == 1;
            p.oc_values[j] = high ? model.ocs()[j].max : model.ocs()[j].min;
        }
        set.points.push_back(std::move(p));
        set.provenance.push_back(Provenance::OA);
    }
    detail::assign_corners_round_robin(model, set);
    return set;
}

// Training design: one minimum-size orthogonal array followed by LHS up to
// `budget` points, corners assigned round-robin across the whole set.
inline DesignSet fixed_planning_set(const CircuitModel& model, std::size_t budget, Rng& rng) {
    const std::size_t runs = minimum_oa_runs(model.continuous_dims());
    if (budget < 8 || budget < runs)
        throw BudgetError("fixed planning budget " + std::to_string(budget) + " is below the minimum of " +
                          std::to_string(std::max<std::size_t>(8, runs)));
    DesignSet set = orthogonal_array(model, runs);
    if (budget > runs) set.append(latin_hypercube(model, budget - runs, rng));
    detail::assign_corners_round_robin(model, set);
    detail::deduplicate(model, set);
    return set;
}

inline constexpr std::size_t kDefaultEvaluationTarget = 5000;

// Two-level full factorial topped up with LHS to `target` points.
inline DesignSet evaluation_set(const CircuitModel& model, std::size_t target, Rng& rng) {
    const std::size_t d = model.continuous_dims();
    const std::uint64_t ff = detail::checked_power(2, d, kFullFactorialCap);
    if (ff > kFullFactorialCap) throw BudgetError("full factorial 2^" + std::to_string(d) + " exceeds cap");
    if (target < ff)
        throw BudgetError("evaluation target " + std::to_string(target) + " is below the " + std::to_string(ff) +
                          " full-factorial points");
    DesignSet set = full_factorial(model, 2);
    if (target > ff) set.append(latin_hypercube(model, target - ff, rng));
    detail::assign_corners_round_robin(model, set);
    detail::deduplicate(model, set);
    return set;
}

inline void write_design_csv(std::ostream& os, const CircuitModel& model, const DesignSet& set) {
    for (const auto& oc : model.ocs()) os << oc.name << ',';
    if (model.corner()) os << model.corner()->name() << ',';
    os << "provenance\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (double v : set.points[i].oc_values) os << format_double(v) << ',';
        if (model.corner()) os << model.corner_label(set.points[i]) << ',';
        os << to_string(set.provenance[i]) << '\n';
    }
}

}  // namespace wcsearch
