#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wcsearch/error.hpp"
#include "wcsearch/hyperspace.hpp"

namespace wcsearch {

// Closed-form benchmark responses over u in [0,1]^d (OCs normalized to the
// unit box). Any d >= 1 is accepted; every constant below is a fixed
// function of the coordinate index.
//
//   multimodal   R = 12 + 6 s + 0.6 q - 2 exp(-s / 0.02)
//                s = mean_i (u_i - c_i)^2,  q = mean_i (1 - cos(4 pi (u_i - c_i)))
//                c_i = 0.70 - 0.05 (floor(i/2) mod 3)  for even i
//                c_i = 0.30 + 0.05 (floor(i/2) mod 3)  for odd i
//                Global minimum 10 at u = c, ripple minima half a period away.
//
//   ridge        R = 30 + 6 tanh(5 (p - 0.45)) + 1.5 p
//                p = sum_i w_i u_i / sum_i w_i,  w_i = 1 + 0.5 (i mod 3)
//                Near-flat plateaus on both ends of the projection.
//
//   interaction  R = -34 + sum_i b_i u_i + (2/d) sum_{i<j} g_ij u_i u_j
//                b_i = (+0.8 if i even else -0.6) (1 + 0.25 (i mod 3))
//                g_ij = 0.2 cos(1.3 i + 0.7 j)
//                Multilinear, so both extrema sit on box vertices.
//
//   affine       R = -34 + sum_i b_i u_i   (interaction without the g terms)
enum class BaseFunction { Multimodal, Ridge, Interaction, Affine };

inline BaseFunction parse_base_function(std::string_view name) {
    if (name == "multimodal") return BaseFunction::Multimodal;
    if (name == "ridge") return BaseFunction::Ridge;
    if (name == "interaction") return BaseFunction::Interaction;
    if (name == "affine") return BaseFunction::Affine;
    throw ValidationError("unknown synthetic base function '" + std::string(name) + "'");
}

inline const char* to_string(BaseFunction f) noexcept {
    switch (f) {
        case BaseFunction::Multimodal: return "multimodal";
        case BaseFunction::Ridge: return "ridge";
        case BaseFunction::Interaction: return "interaction";
        case BaseFunction::Affine: return "affine";
    }
    return "?";
}

namespace synthetic {

inline double multimodal_center(std::size_t i) noexcept {
    const double shift = 0.05 * double((i / 2) % 3);
    return i % 2 == 0 ? 0.70 - shift : 0.30 + shift;
}

inline double ridge_weight(std::size_t i) noexcept { return 1.0 + 0.5 * double(i % 3); }

inline double linear_coefficient(std::size_t i) noexcept {
    return (i % 2 == 0 ? 0.8 : -0.6) * (1.0 + 0.25 * double(i % 3));
}

inline double interaction_coefficient(std::size_t i, std::size_t j) noexcept {
    return 0.2 * std::cos(1.3 * double(i) + 0.7 * double(j));
}

inline double multimodal(std::span<const double> u) noexcept {
    const double d = double(u.size());
    double s = 0.0, q = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double t = u[i] - multimodal_center(i);
        s += t * t;
        q += 1.0 - std::cos(4.0 * std::numbers::pi * t);
    }
    s /= d;
    q /= d;
    return 12.0 + 6.0 * s + 0.6 * q - 2.0 * std::exp(-s / 0.02);
}

inline double ridge(std::span<const double> u) noexcept {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        num += ridge_weight(i) * u[i];
        den += ridge_weight(i);
    }
    const double p = num / den;
    return 30.0 + 6.0 * std::tanh(5.0 * (p - 0.45)) + 1.5 * p;
}

inline double affine(std::span<const double> u) noexcept {
    double r = -34.0;
    for (std::size_t i = 0; i < u.size(); ++i) r += linear_coefficient(i) * u[i];
    return r;
}

inline double interaction(std::span<const double> u) noexcept {
    double r = affine(u);
    const double scale = 2.0 / double(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = i + 1; j < u.size(); ++j) r += scale * interaction_coefficient(i, j) * u[i] * u[j];
    return r;
}

inline double evaluate(BaseFunction f, std::span<const double> u) noexcept {
    switch (f) {
        case BaseFunction::Multimodal: return multimodal(u);
        case BaseFunction::Ridge: return ridge(u);
        case BaseFunction::Interaction: return interaction(u);
        case BaseFunction::Affine: return affine(u);
    }
    return 0.0;
}

// The base functions with their constants precomputed for one dimension.
// A value splits into terms of coordinate 0 and terms of the remaining
// coordinates so that grid sweeps over coordinate 0 reuse the rest:
//   value(u) = combine(outer(u), first(u[0]))
class PreparedBase {
public:
    struct Terms {
        double a = 0.0;
        double b = 0.0;
    };

    PreparedBase(BaseFunction f, std::size_t d) : f_(f), d_(d) {
        if (d == 0) throw ValidationError("synthetic base function needs at least one input");
        double wsum = 0.0;
        for (std::size_t i = 0; i < d; ++i) wsum += ridge_weight(i);
        for (std::size_t i = 0; i < d; ++i) {
            center_.push_back(multimodal_center(i));
            weight_.push_back(ridge_weight(i) / wsum);
            linear_.push_back(linear_coefficient(i));
        }
        pair_.assign(d * d, 0.0);
        if (f == BaseFunction::Interaction)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = i + 1; j < d; ++j) pair_[i * d + j] = 2.0 / double(d) * interaction_coefficient(i, j);
    }

    BaseFunction function() const noexcept { return f_; }

    Terms outer(std::span<const double> u) const noexcept {
        Terms t;
        switch (f_) {
            case BaseFunction::Multimodal:
                for (std::size_t i = 1; i < d_; ++i) {
                    const double x = u[i] - center_[i];
                    t.a += x * x;
                    t.b += 1.0 - std::cos(4.0 * std::numbers::pi * x);
                }
                break;
            case BaseFunction::Ridge:
                for (std::size_t i = 1; i < d_; ++i) t.a += weight_[i] * u[i];
                break;
            case BaseFunction::Interaction:
            case BaseFunction::Affine:
                t.a = -34.0;
                t.b = linear_[0];
                for (std::size_t i = 1; i < d_; ++i) {
                    t.a += linear_[i] * u[i];
                    t.b += pair_[i] * u[i];
                    for (std::size_t j = i + 1; j < d_; ++j) t.a += pair_[i * d_ + j] * u[i] * u[j];
                }
                break;
        }
        return t;
    }

    Terms first(double u0) const noexcept {
        switch (f_) {
            case BaseFunction::Multimodal: {
                const double x = u0 - center_[0];
                return {x * x, 1.0 - std::cos(4.0 * std::numbers::pi * x)};
            }
            case BaseFunction::Ridge: return {weight_[0] * u0, 0.0};
            case BaseFunction::Interaction:
            case BaseFunction::Affine: return {u0, 0.0};
        }
        return {};
    }

    double combine(const Terms& outer, const Terms& first) const noexcept {
        switch (f_) {
            case BaseFunction::Multimodal: {
                const double s = (outer.a + first.a) / double(d_);
                const double q = (outer.b + first.b) / double(d_);
                return 12.0 + 6.0 * s + 0.6 * q - 2.0 * std::exp(-s / 0.02);
            }
            case BaseFunction::Ridge: {
                const double p = outer.a + first.a;
                return 30.0 + 6.0 * std::tanh(5.0 * (p - 0.45)) + 1.5 * p;
            }
            case BaseFunction::Interaction:
            case BaseFunction::Affine: return outer.a + outer.b * first.a;
        }
        return 0.0;
    }

    double operator()(std::span<const double> u) const noexcept { return combine(outer(u), first(u[0])); }

private:
    BaseFunction f_;
    std::size_t d_;
    std::vector<double> center_, weight_, linear_, pair_;
};

}  // namespace synthetic

struct AffineCoefficient {
    double a = 1.0;
    double b = 0.0;
};

// coefficients[response][corner label index]
struct CornerCoefficients {
    std::vector<std::vector<AffineCoefficient>> table;
};

// Synthetic circuit: base responses followed by the per-corner affine
// transform R' = a R + b.
class SyntheticCircuit {
public:
    SyntheticCircuit(CircuitModel model, std::vector<BaseFunction> bases, CornerCoefficients coefficients)
        : model_(std::move(model)), bases_(std::move(bases)), coefficients_(std::move(coefficients)) {
        for (auto f : bases_) prepared_.emplace_back(f, model_.continuous_dims());
        const std::size_t responses = model_.specs().size();
        if (bases_.size() != responses)
            throw ValidationError("synthetic circuit: " + std::to_string(bases_.size()) + " base functions for " +
                                  std::to_string(responses) + " responses");
        const std::size_t labels = model_.corner() ? model_.corner()->labels().size() : 1;
        if (coefficients_.table.empty())
            coefficients_.table.assign(responses, std::vector<AffineCoefficient>(labels));
        if (coefficients_.table.size() != responses)
            throw ValidationError("synthetic circuit: corner coefficient table needs one row per response");
        for (std::size_t r = 0; r < responses; ++r) {
            if (coefficients_.table[r].size() != labels)
                throw ValidationError("synthetic circuit: response '" + model_.specs()[r].name + "' needs " +
                                      std::to_string(labels) + " corner coefficients");
            for (const auto& c : coefficients_.table[r])
                if (c.a == 0.0 || !std::isfinite(c.a) || !std::isfinite(c.b))
                    throw ValidationError("synthetic circuit: corner coefficient a must be finite and non-zero");
        }
    }

    const CircuitModel& model() const noexcept { return model_; }
    const std::vector<BaseFunction>& bases() const noexcept { return bases_; }
    const CornerCoefficients& coefficients() const noexcept { return coefficients_; }
    const std::vector<synthetic::PreparedBase>& prepared() const noexcept { return prepared_; }

    std::size_t corner_count() const noexcept { return model_.corner() ? model_.corner()->labels().size() : 1; }

    // Base responses at unit-box coordinates; `out` has one slot per response.
    void base_responses_unit(std::span<const double> u, std::span<double> out) const noexcept {
        for (std::size_t r = 0; r < prepared_.size(); ++r) out[r] = prepared_[r](u);
    }

    std::vector<double> base_responses(const ConfigurationPoint& point) const {
        model_.validate(point);
        const auto u = unit(point.oc_values);
        std::vector<double> out(bases_.size());
        base_responses_unit(u, out);
        return out;
    }

    std::vector<double> corner_transform(std::vector<double> responses, const std::string& label) const {
        return corner_transform(std::move(responses), corner_index(label));
    }

    std::vector<double> corner_transform(std::vector<double> responses, std::size_t corner) const {
        if (responses.size() != bases_.size()) throw ValidationError("corner_transform: response count mismatch");
        for (std::size_t r = 0; r < responses.size(); ++r) {
            const auto& c = coefficients_.table[r][corner];
            responses[r] = c.a * responses[r] + c.b;
        }
        return responses;
    }

    std::size_t corner_index(const std::string& label) const {
        if (!model_.corner()) {
            if (label.empty()) return 0;
            throw ValidationError("circuit '" + model_.name() + "' has no process corner");
        }
        return model_.corner()->index_of(label);
    }

    std::size_t corner_index(const ConfigurationPoint& point) const {
        return model_.corner() ? model_.corner()->index_of(*point.corner) : 0;
    }

    std::vector<double> simulate(const ConfigurationPoint& point) const {
        return corner_transform(base_responses(point), corner_index(point));
    }

    std::vector<double> unit(std::span<const double> oc_values) const {
        std::vector<double> u(oc_values.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            const auto& oc = model_.ocs()[i];
            u[i] = (oc_values[i] - oc.min) / (oc.max - oc.min);
        }
        return u;
    }

    std::vector<double> physical(std::span<const double> u) const {
        std::vector<double> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            const auto& oc = model_.ocs()[i];
            x[i] = u[i] >= 1.0 ? oc.max : oc.min + u[i] * (oc.max - oc.min);
        }
        return x;
    }

private:
    CircuitModel model_;
    std::vector<BaseFunction> bases_;
    CornerCoefficients coefficients_;
    std::vector<synthetic::PreparedBase> prepared_;
};

}  // namespace wcsearch
