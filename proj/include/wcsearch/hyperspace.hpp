#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wcsearch/error.hpp"

namespace wcsearch {

struct OperatingCondition {
    std::string name;
    double min = 0.0;
    double max = 1.0;
};

struct CornerCode {
    int first = 0;
    int second = 0;
    friend auto operator<=>(const CornerCode&, const CornerCode&) = default;
};

inline std::string to_string(const CornerCode& code) {
    return "(" + std::to_string(code.first) + "," + std::to_string(code.second) + ")";
}

// A categorical process corner. Each label carries a pair of small
// non-negative integers; only labels whose code appears in the valid list
// take part in sampling and search.
class ProcessCorner {
public:
    ProcessCorner() = default;

    ProcessCorner(std::string name, std::vector<std::string> labels, std::vector<CornerCode> codes,
                  std::optional<std::vector<CornerCode>> valid = std::nullopt)
        : name_(std::move(name)), labels_(std::move(labels)), codes_(std::move(codes)) {
        if (labels_.empty()) throw ValidationError("process corner '" + name_ + "' has no labels");
        if (labels_.size() != codes_.size())
            throw ValidationError("process corner '" + name_ + "': " + std::to_string(labels_.size()) +
                                  " labels but " + std::to_string(codes_.size()) + " code pairs");
        std::set<std::string> seen_labels;
        std::set<CornerCode> seen_codes;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (!seen_labels.insert(labels_[i]).second)
                throw ValidationError("process corner '" + name_ + "': duplicate label '" + labels_[i] + "'");
            if (codes_[i].first < 0 || codes_[i].second < 0)
                throw ValidationError("process corner '" + name_ + "': negative code for '" + labels_[i] + "'");
            if (!seen_codes.insert(codes_[i]).second)
                throw ValidationError("process corner '" + name_ + "': code " + to_string(codes_[i]) +
                                      " assigned to more than one label");
            max_code_.first = std::max(max_code_.first, codes_[i].first);
            max_code_.second = std::max(max_code_.second, codes_[i].second);
        }
        if (valid) {
            for (const auto& code : *valid)
                if (!seen_codes.contains(code))
                    throw ValidationError("process corner '" + name_ + "': valid combination " + to_string(code) +
                                          " has no label");
        }
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            const bool ok = !valid || std::find(valid->begin(), valid->end(), codes_[i]) != valid->end();
            if (ok) valid_.push_back(i);
        }
        if (valid_.empty()) throw ValidationError("process corner '" + name_ + "' has no valid combinations");
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<CornerCode>& codes() const noexcept { return codes_; }
    CornerCode max_code() const noexcept { return max_code_; }

    std::vector<std::string> valid_labels() const {
        std::vector<std::string> out;
        for (auto i : valid_) out.push_back(labels_[i]);
        return out;
    }

    std::vector<CornerCode> valid_codes() const {
        std::vector<CornerCode> out;
        for (auto i : valid_) out.push_back(codes_[i]);
        return out;
    }

    bool is_valid(const CornerCode& code) const {
        return std::any_of(valid_.begin(), valid_.end(), [&](auto i) { return codes_[i] == code; });
    }

    std::size_t index_of(const std::string& label) const {
        const auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end())
            throw ValidationError("unknown corner label '" + label + "' for process corner '" + name_ + "'");
        return static_cast<std::size_t>(it - labels_.begin());
    }

    std::size_t index_of(const CornerCode& code) const {
        const auto it = std::find(codes_.begin(), codes_.end(), code);
        if (it == codes_.end())
            throw ValidationError("unknown corner code " + to_string(code) + " for process corner '" + name_ + "'");
        return static_cast<std::size_t>(it - codes_.begin());
    }

    CornerCode encode(const std::string& label) const { return codes_[index_of(label)]; }
    const std::string& decode(const CornerCode& code) const { return labels_[index_of(code)]; }

private:
    std::string name_;
    std::vector<std::string> labels_;
    std::vector<CornerCode> codes_;
    std::vector<std::size_t> valid_;
    CornerCode max_code_{};
};

// LowerBound: the response must exceed the threshold. UpperBound: it must
// stay below it.
enum class Bound { Lower, Upper };
enum class Direction { Minimize, Maximize };

struct ResponseSpec {
    std::string name;
    double threshold = 0.0;
    Bound bound = Bound::Lower;
};

inline Direction worst_direction(const ResponseSpec& spec) noexcept {
    return spec.bound == Bound::Lower ? Direction::Minimize : Direction::Maximize;
}

// Every search minimizes the oriented response.
inline double oriented(const ResponseSpec& spec, double value) noexcept {
    return worst_direction(spec) == Direction::Minimize ? value : -value;
}

inline double from_oriented(const ResponseSpec& spec, double value) noexcept { return oriented(spec, value); }

// Positive iff the spec is strictly satisfied.
inline double margin(const ResponseSpec& spec, double value) {
    if (!std::isfinite(value))
        throw SimulatorFault("non-finite value for response '" + spec.name + "'");
    return spec.bound == Bound::Lower ? value - spec.threshold : spec.threshold - value;
}

// Equality with the threshold counts as a violation.
inline bool is_violation(const ResponseSpec& spec, double value) { return margin(spec, value) <= 0.0; }

struct ConfigurationPoint {
    std::vector<double> oc_values;
    std::optional<CornerCode> corner;
    friend bool operator==(const ConfigurationPoint&, const ConfigurationPoint&) = default;
};

enum class Backend { Synthetic, External };

class CircuitModel {
public:
    CircuitModel() = default;

    CircuitModel(std::string name, std::vector<OperatingCondition> ocs, std::optional<ProcessCorner> corner,
                 std::vector<ResponseSpec> specs, Backend backend = Backend::Synthetic)
        : name_(std::move(name)),
          ocs_(std::move(ocs)),
          corner_(std::move(corner)),
          specs_(std::move(specs)),
          backend_(backend) {
        if (ocs_.empty()) throw ValidationError("circuit '" + name_ + "' declares no operating conditions");
        std::set<std::string> names;
        for (const auto& oc : ocs_) {
            if (!(oc.min < oc.max))
                throw ValidationError("operating condition '" + oc.name + "': min must be < max");
            if (!names.insert(oc.name).second)
                throw ValidationError("duplicate operating condition '" + oc.name + "'");
        }
        if (specs_.empty()) throw ValidationError("circuit '" + name_ + "' declares no responses");
        std::set<std::string> responses;
        for (const auto& s : specs_)
            if (!responses.insert(s.name).second) throw ValidationError("duplicate response '" + s.name + "'");
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<OperatingCondition>& ocs() const noexcept { return ocs_; }
    const std::optional<ProcessCorner>& corner() const noexcept { return corner_; }
    const std::vector<ResponseSpec>& specs() const noexcept { return specs_; }
    std::vector<ResponseSpec>& specs() noexcept { return specs_; }
    Backend backend() const noexcept { return backend_; }

    std::size_t continuous_dims() const noexcept { return ocs_.size(); }
    std::size_t dimension() const noexcept { return ocs_.size() + (corner_ ? 2 : 0); }

    std::size_t response_index(const std::string& response) const {
        for (std::size_t i = 0; i < specs_.size(); ++i)
            if (specs_[i].name == response) return i;
        throw ValidationError("unknown response '" + response + "'");
    }

    void validate(const ConfigurationPoint& point) const {
        if (point.oc_values.size() != ocs_.size())
            throw ValidationError("point has " + std::to_string(point.oc_values.size()) + " OC values, circuit '" +
                                  name_ + "' expects " + std::to_string(ocs_.size()));
        for (std::size_t i = 0; i < ocs_.size(); ++i) {
            const double v = point.oc_values[i];
            if (!(v >= ocs_[i].min && v <= ocs_[i].max))
                throw ValidationError("operating condition '" + ocs_[i].name + "' value " + std::to_string(v) +
                                      " outside [" + std::to_string(ocs_[i].min) + ", " +
                                      std::to_string(ocs_[i].max) + "]");
        }
        if (corner_) {
            if (!point.corner) throw ValidationError("point lacks a code for corner '" + corner_->name() + "'");
            if (!corner_->is_valid(*point.corner))
                throw ValidationError("corner '" + corner_->name() + "' code " + to_string(*point.corner) +
                                      " is not a valid combination");
        } else if (point.corner) {
            throw ValidationError("circuit '" + name_ + "' has no process corner but point carries a code");
        }
    }

    // Continuous dims map affinely onto [0,1]; the corner code pair follows as
    // two coordinates, each divided by the largest code in that position.
    Eigen::VectorXd normalize(const ConfigurationPoint& point) const {
        validate(point);
        Eigen::VectorXd u(static_cast<Eigen::Index>(dimension()));
        for (std::size_t i = 0; i < ocs_.size(); ++i)
            u[static_cast<Eigen::Index>(i)] = (point.oc_values[i] - ocs_[i].min) / (ocs_[i].max - ocs_[i].min);
        if (corner_) {
            const auto top = corner_->max_code();
            const auto d = static_cast<Eigen::Index>(ocs_.size());
            u[d] = top.first > 0 ? double(point.corner->first) / top.first : 0.0;
            u[d + 1] = top.second > 0 ? double(point.corner->second) / top.second : 0.0;
        }
        return u;
    }

    // Continuous coordinates are clamped into the box; corner coordinates are
    // rounded to the nearest integer code.
    ConfigurationPoint denormalize(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        if (static_cast<std::size_t>(u.size()) != dimension())
            throw ValidationError("normalized point has dimension " + std::to_string(u.size()) + ", expected " +
                                  std::to_string(dimension()));
        ConfigurationPoint p;
        p.oc_values.resize(ocs_.size());
        for (std::size_t i = 0; i < ocs_.size(); ++i) {
            const double t = std::clamp(u[static_cast<Eigen::Index>(i)], 0.0, 1.0);
            if (t == 1.0)
                p.oc_values[i] = ocs_[i].max;
            else
                p.oc_values[i] = std::clamp(ocs_[i].min + t * (ocs_[i].max - ocs_[i].min), ocs_[i].min, ocs_[i].max);
        }
        if (corner_) {
            const auto top = corner_->max_code();
            const auto d = static_cast<Eigen::Index>(ocs_.size());
            p.corner = CornerCode{static_cast<int>(std::lround(u[d] * top.first)),
                                  static_cast<int>(std::lround(u[d + 1] * top.second))};
        }
        return p;
    }

    std::string corner_label(const ConfigurationPoint& point) const {
        if (!corner_ || !point.corner) return {};
        return corner_->decode(*point.corner);
    }

private:
    std::string name_;
    std::vector<OperatingCondition> ocs_;
    std::optional<ProcessCorner> corner_;
    std::vector<ResponseSpec> specs_;
    Backend backend_ = Backend::Synthetic;
};

}  // namespace wcsearch
