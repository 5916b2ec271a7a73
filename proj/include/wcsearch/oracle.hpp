#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wcsearch/error.hpp"
#include "wcsearch/format.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/synthetic_circuit.hpp"

namespace wcsearch {

struct Extremum {
    double value = 0.0;
    ConfigurationPoint at;
};

struct ResponseExtrema {
    std::string response;
    Extremum min;
    Extremum max;

    double range() const noexcept { return max.value - min.value; }
    const Extremum& worst(const ResponseSpec& spec) const noexcept {
        return worst_direction(spec) == Direction::Minimize ? min : max;
    }
};

struct OracleOptions {
    std::size_t grid_density = 9;
    std::size_t max_density = 33;
    // Allowed extrema change between a grid and its refinement, relative to
    // the response range.
    double tolerance = 1e-3;
    bool polish = true;
};

namespace detail {

// Golden-section coordinate descent of `f` from `u`, each coordinate
// searched within +-h of its current value and clipped to [0,1].
template <class F>
double coordinate_polish(F&& f, std::vector<double>& u, double h, double value) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int sweep = 0; sweep < 60; ++sweep) {
        const double before = value;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double keep = u[i];
            double lo = std::max(0.0, keep - h), hi = std::min(1.0, keep + h);
            auto at = [&](double t) {
                u[i] = t;
                return f(u);
            };
            double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
            double f1 = at(x1), f2 = at(x2);
            for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
                if (f1 < f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = at(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = at(x2);
                }
            }
            double best_t = keep, best_v = value;
            for (double t : {x1, x2, lo, hi}) {
                const double v = at(t);
                if (v < best_v) {
                    best_v = v;
                    best_t = t;
                }
            }
            u[i] = best_t;
            value = best_v;
        }
        if (before - value <= 1e-14 * std::max(1.0, std::abs(value))) break;
        h *= 0.5;
    }
    return value;
}

struct BaseExtrema {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    std::vector<double> argmin, argmax;
};

}  // namespace detail

// Extrema of the base responses over a `density`^d grid of the unit box,
// optionally polished by coordinate descent from the best grid nodes.
inline std::vector<detail::BaseExtrema> base_grid_extrema(const SyntheticCircuit& circuit, std::size_t density,
                                                          bool polish = true) {
    if (density < 2) throw ValidationError("oracle grid density must be >= 2");
    const std::size_t d = circuit.model().continuous_dims();
    const std::size_t nr = circuit.model().specs().size();
    std::vector<detail::BaseExtrema> ext(nr);
    std::vector<std::size_t> digit(d, 0);
    std::vector<double> levels(density);
    for (std::size_t k = 0; k < density; ++k) levels[k] = k + 1 == density ? 1.0 : double(k) / double(density - 1);
    const auto& bases = circuit.prepared();
    // first[r][k]: terms of coordinate 0 at level k.
    std::vector<std::vector<synthetic::PreparedBase::Terms>> first(nr);
    for (std::size_t r = 0; r < nr; ++r)
        for (double level : levels) first[r].push_back(bases[r].first(level));
    std::vector<synthetic::PreparedBase::Terms> outer(nr);
    std::vector<double> u(d, 0.0);
    while (true) {
        for (std::size_t r = 0; r < nr; ++r) outer[r] = bases[r].outer(u);
        for (std::size_t k = 0; k < density; ++k) {
            for (std::size_t r = 0; r < nr; ++r) {
                const double v = bases[r].combine(outer[r], first[r][k]);
                if (v < ext[r].min) {
                    ext[r].min = v;
                    ext[r].argmin = u;
                    ext[r].argmin[0] = levels[k];
                }
                if (v > ext[r].max) {
                    ext[r].max = v;
                    ext[r].argmax = u;
                    ext[r].argmax[0] = levels[k];
                }
            }
        }
        std::size_t j = 1;
        for (; j < d; ++j) {
            if (++digit[j] < density) {
                u[j] = levels[digit[j]];
                break;
            }
            digit[j] = 0;
            u[j] = levels[0];
        }
        if (j >= d) break;
    }
    if (polish) {
        const double h = 1.0 / double(density - 1);
        for (std::size_t r = 0; r < nr; ++r) {
            const auto& f = bases[r];
            ext[r].min = detail::coordinate_polish([&f](const std::vector<double>& x) { return f(x); }, ext[r].argmin,
                                                   h, ext[r].min);
            ext[r].max = -detail::coordinate_polish([&f](const std::vector<double>& x) { return -f(x); },
                                                    ext[r].argmax, h, -ext[r].max);
        }
    }
    return ext;
}

// Combines base extrema with every valid corner's affine transform. With
// a > 0 a corner maps base min/max to a*min+b / a*max+b; with a < 0 the roles
// swap. This is exact, so the result equals the brute force over grid x corners.
inline std::vector<ResponseExtrema> combine_corners(const SyntheticCircuit& circuit,
                                                    const std::vector<detail::BaseExtrema>& base) {
    const auto& model = circuit.model();
    std::vector<std::size_t> corners;
    if (model.corner()) {
        for (const auto& code : model.corner()->valid_codes()) corners.push_back(model.corner()->index_of(code));
    } else {
        corners.push_back(0);
    }
    std::vector<ResponseExtrema> result;
    for (std::size_t r = 0; r < base.size(); ++r) {
        ResponseExtrema e;
        e.response = model.specs()[r].name;
        e.min.value = std::numeric_limits<double>::infinity();
        e.max.value = -std::numeric_limits<double>::infinity();
        for (auto c : corners) {
            const auto& k = circuit.coefficients().table[r][c];
            const double lo_from_min = k.a * base[r].min + k.b, lo_from_max = k.a * base[r].max + k.b;
            const bool positive = k.a > 0.0;
            const double lo = positive ? lo_from_min : lo_from_max;
            const double hi = positive ? lo_from_max : lo_from_min;
            const auto& lo_at = positive ? base[r].argmin : base[r].argmax;
            const auto& hi_at = positive ? base[r].argmax : base[r].argmin;
            std::optional<CornerCode> code;
            if (model.corner()) code = model.corner()->codes()[c];
            if (lo < e.min.value) e.min = {lo, ConfigurationPoint{circuit.physical(lo_at), code}};
            if (hi > e.max.value) e.max = {hi, ConfigurationPoint{circuit.physical(hi_at), code}};
        }
        result.push_back(std::move(e));
    }
    return result;
}

inline std::vector<ResponseExtrema> grid_extrema(const SyntheticCircuit& circuit, std::size_t density,
                                                 bool polish = true) {
    return combine_corners(circuit, base_grid_extrema(circuit, density, polish));
}

struct OracleResult {
    std::vector<ResponseExtrema> responses;
    std::size_t density = 0;  // finer of the two grids that agreed
};

// Refines the grid (density -> 2 density - 1, nested) until two successive
// grids agree within the tolerance for every response.
inline OracleResult oracle_extrema(const SyntheticCircuit& circuit, const OracleOptions& options = {}) {
    if (options.grid_density < 2) throw ValidationError("oracle grid density must be >= 2");
    std::size_t density = options.grid_density;
    auto coarse = grid_extrema(circuit, density, options.polish);
    while (2 * density - 1 <= options.max_density) {
        const std::size_t finer = 2 * density - 1;
        auto fine = grid_extrema(circuit, finer, options.polish);
        bool stable = true;
        for (std::size_t r = 0; r < fine.size(); ++r) {
            const double range = fine[r].range();
            const double scale = range > 0.0 ? range : std::max(1.0, std::abs(fine[r].max.value));
            if (std::abs(fine[r].min.value - coarse[r].min.value) > options.tolerance * scale ||
                std::abs(fine[r].max.value - coarse[r].max.value) > options.tolerance * scale)
                stable = false;
        }
        if (stable) return {std::move(fine), finer};
        coarse = std::move(fine);
        density = finer;
    }
    throw OracleUnstableError("oracle extrema did not stabilize up to grid density " +
                              std::to_string(options.max_density));
}

inline std::string format_point(const CircuitModel& model, const ConfigurationPoint& p) {
    std::string s;
    for (std::size_t i = 0; i < p.oc_values.size(); ++i) {
        if (i) s += ' ';
        s += format_double(p.oc_values[i]);
    }
    if (model.corner() && p.corner) s += ' ' + model.corner_label(p);
    return s;
}

inline ConfigurationPoint parse_point(const CircuitModel& model, const std::string& text) {
    const auto fields = split(text, ' ');
    const std::size_t d = model.continuous_dims();
    const std::size_t expected = d + (model.corner() ? 1 : 0);
    if (fields.size() != expected)
        throw ParseError("point '" + text + "' has " + std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(expected));
    ConfigurationPoint p;
    for (std::size_t i = 0; i < d; ++i) p.oc_values.push_back(parse_double(fields[i]));
    if (model.corner()) p.corner = model.corner()->encode(fields[d]);
    return p;
}

inline constexpr const char* kExtremaHeader = "# wcsearch extrema v1";

inline void write_extrema(std::ostream& os, const CircuitModel& model, const OracleResult& result) {
    os << kExtremaHeader << '\n';
    os << "# grid_density " << result.density << '\n';
    os << "response,min,max,argmin,argmax\n";
    for (const auto& e : result.responses)
        os << e.response << ',' << format_double(e.min.value) << ',' << format_double(e.max.value) << ','
           << format_point(model, e.min.at) << ',' << format_point(model, e.max.at) << '\n';
}

inline std::vector<ResponseExtrema> read_extrema(std::istream& is, const CircuitModel& model) {
    std::string line;
    if (!std::getline(is, line) || line != kExtremaHeader) throw ParseError("extrema file lacks its version header");
    std::vector<ResponseExtrema> out(model.specs().size());
    std::vector<bool> seen(out.size(), false);
    bool header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.starts_with('#')) continue;
        if (!header) {
            if (line != "response,min,max,argmin,argmax") throw ParseError("unexpected extrema columns: " + line);
            header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 5) throw ParseError("malformed extrema row: " + line);
        const std::size_t r = model.response_index(f[0]);
        out[r] = {f[0], {parse_double(f[1]), parse_point(model, f[3])}, {parse_double(f[2]), parse_point(model, f[4])}};
        seen[r] = true;
    }
    for (std::size_t r = 0; r < seen.size(); ++r)
        if (!seen[r]) throw ParseError("extrema file has no row for response '" + model.specs()[r].name + "'");
    return out;
}

}  // namespace wcsearch
