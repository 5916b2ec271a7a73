#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wcsearch/error.hpp"
#include "wcsearch/format.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/synthetic_circuit.hpp"

namespace wcsearch {

namespace toml {

// Reader for the TOML subset used by circuit files: [table], [[array of
// tables]], bare or quoted keys, and values that are basic strings,
// integers, floats, booleans or (nested, multi-line) arrays. Dotted keys,
// inline tables and dates are not supported.
class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    nlohmann::json parse() {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                const bool array = text_.substr(pos_, 2) == "[[";
                pos_ += array ? 2 : 1;
                skip_spaces();
                const std::string name = key();
                skip_spaces();
                if (!consume(array ? "]]" : "]")) fail("expected closing bracket after table name");
                if (array) {
                    auto& arr = root[name];
                    if (arr.is_null()) arr = nlohmann::json::array();
                    if (!arr.is_array()) fail("'" + name + "' is already a table");
                    arr.push_back(nlohmann::json::object());
                    table = &arr.back();
                } else {
                    if (root.contains(name)) fail("table '" + name + "' defined twice");
                    root[name] = nlohmann::json::object();
                    table = &root[name];
                }
            } else {
                const std::string k = key();
                skip_spaces();
                if (!consume("=")) fail("expected '=' after key '" + k + "'");
                skip_spaces();
                if (table->contains(k)) fail("duplicate key '" + k + "'");
                (*table)[k] = value();
            }
            end_of_line();
        }
        return root;
    }

private:
    bool eof() const noexcept { return pos_ >= text_.size(); }
    char peek() const noexcept { return eof() ? '\0' : text_[pos_]; }

    bool consume(std::string_view token) {
        if (text_.substr(pos_, token.size()) != token) return false;
        pos_ += token.size();
        return true;
    }

    [[noreturn]] void fail(const std::string& message) const {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
        throw ParseError("circuit file line " + std::to_string(line) + ": " + message);
    }

    void skip_spaces() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_blank_lines() {
        while (true) {
            skip_spaces();
            skip_comment();
            if (peek() == '\r') ++pos_;
            if (peek() != '\n') return;
            ++pos_;
        }
    }

    // Whitespace, comments and newlines inside arrays.
    void skip_insignificant() {
        while (!eof()) {
            skip_spaces();
            skip_comment();
            if (peek() == '\n' || peek() == '\r')
                ++pos_;
            else
                return;
        }
    }

    void end_of_line() {
        skip_spaces();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected trailing characters");
        ++pos_;
    }

    std::string key() {
        if (peek() == '"') return string();
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string string() {
        if (!consume("\"")) fail("expected '\"'");
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = text_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated escape");
            const char e = text_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(std::string("unsupported escape '\\") + e + "'");
            }
        }
    }

    nlohmann::json value() {
        const char c = peek();
        if (c == '"') return string();
        if (c == '[') {
            ++pos_;
            nlohmann::json arr = nlohmann::json::array();
            while (true) {
                skip_insignificant();
                if (consume("]")) return arr;
                arr.push_back(value());
                skip_insignificant();
                if (consume(",")) continue;
                if (consume("]")) return arr;
                fail("expected ',' or ']' in array");
            }
        }
        if (consume("true")) return true;
        if (consume("false")) return false;
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            ++pos_;
        std::string token(text_.substr(start, pos_ - start));
        std::erase(token, '_');
        if (token.empty()) fail("expected a value");
        if (token.find_first_of(".eE") == std::string::npos) {
            long long v = 0;
            const char* first = token.data() + (token.front() == '+' ? 1 : 0);
            const auto [end, ec] = std::from_chars(first, token.data() + token.size(), v);
            if (ec != std::errc{} || end != token.data() + token.size()) fail("invalid value '" + token + "'");
            return v;
        }
        try {
            return parse_double(token);
        } catch (const ParseError&) {
            fail("invalid value '" + token + "'");
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

inline nlohmann::json parse(std::string_view text) { return Reader(text).parse(); }

}  // namespace toml

struct ExternalSettings {
    std::vector<std::string> command;
    std::chrono::milliseconds timeout = std::chrono::seconds(600);
};

// Parsed circuit description: the model plus backend-specific settings.
struct CircuitFile {
    CircuitModel model;
    std::vector<BaseFunction> bases;  // synthetic backend
    CornerCoefficients coefficients;  // synthetic backend
    ExternalSettings external;        // external backend

    SyntheticCircuit synthetic() const {
        if (model.backend() != Backend::Synthetic)
            throw UnsupportedBackendError("circuit '" + model.name() + "' does not use the synthetic backend");
        return SyntheticCircuit(model, bases, coefficients);
    }
};

inline constexpr const char* kSimulatorEnv = "WCSEARCH_SIMULATOR";

namespace detail {

template <class T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError(where + ": missing '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(where + ": '" + key + "' has the wrong type");
    }
}

inline double number(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(where + ": must be finite");
    return d;
}

inline CornerCode code_pair(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ParseError(where + ": expected a pair of integers");
    return {v[0].get<int>(), v[1].get<int>()};
}

inline std::vector<std::string> split_command(const std::string& text) {
    std::istringstream ss(text);
    std::vector<std::string> out;
    for (std::string word; ss >> word;) out.push_back(word);
    return out;
}

}  // namespace detail

inline CircuitFile parse_circuit(std::string_view text) {
    const nlohmann::json root = toml::parse(text);
    CircuitFile file;
    const auto name = detail::required<std::string>(root, "name", "circuit");
    const auto backend_name = root.contains("backend") ? detail::required<std::string>(root, "backend", "circuit")
                                                       : std::string("synthetic");
    Backend backend;
    if (backend_name == "synthetic")
        backend = Backend::Synthetic;
    else if (backend_name == "external")
        backend = Backend::External;
    else
        throw ParseError("circuit: backend must be \"synthetic\" or \"external\", got \"" + backend_name + "\"");

    std::vector<OperatingCondition> ocs;
    if (!root.contains("oc") || !root["oc"].is_array()) throw ParseError("circuit: no [[oc]] entries");
    for (std::size_t i = 0; i < root["oc"].size(); ++i) {
        const auto& o = root["oc"][i];
        const std::string where = "oc #" + std::to_string(i + 1);
        ocs.push_back({detail::required<std::string>(o, "name", where), detail::number(o.value("min", nlohmann::json()), where + " min"),
                       detail::number(o.value("max", nlohmann::json()), where + " max")});
    }

    std::optional<ProcessCorner> corner;
    if (root.contains("corner")) {
        const auto& c = root["corner"];
        const auto labels = detail::required<std::vector<std::string>>(c, "labels", "corner");
        if (!c.contains("codes") || !c["codes"].is_array()) throw ParseError("corner: missing 'codes'");
        std::vector<CornerCode> codes;
        for (const auto& v : c["codes"]) codes.push_back(detail::code_pair(v, "corner codes"));
        std::optional<std::vector<CornerCode>> valid;
        if (c.contains("valid")) {
            valid.emplace();
            for (const auto& v : c["valid"]) valid->push_back(detail::code_pair(v, "corner valid"));
        }
        corner.emplace(c.value("name", std::string("pc")), labels, codes, valid);
    }

    std::vector<ResponseSpec> specs;
    if (!root.contains("response") || !root["response"].is_array()) throw ParseError("circuit: no [[response]] entries");
    const std::size_t labels = corner ? corner->labels().size() : 1;
    for (std::size_t i = 0; i < root["response"].size(); ++i) {
        const auto& r = root["response"][i];
        const std::string where = "response #" + std::to_string(i + 1);
        ResponseSpec spec;
        spec.name = detail::required<std::string>(r, "name", where);
        const auto dir = detail::required<std::string>(r, "direction", where);
        if (dir == "lower")
            spec.bound = Bound::Lower;
        else if (dir == "upper")
            spec.bound = Bound::Upper;
        else
            throw ParseError(where + ": direction must be \"lower\" or \"upper\"");
        spec.threshold = detail::number(r.value("threshold", nlohmann::json()), where + " threshold");
        specs.push_back(spec);
        if (backend == Backend::Synthetic) {
            file.bases.push_back(parse_base_function(detail::required<std::string>(r, "base", where)));
            std::vector<AffineCoefficient> row(labels);
            if (r.contains("coefficients")) {
                const auto& table = r["coefficients"];
                if (!table.is_array() || table.size() != labels)
                    throw ParseError(where + ": coefficients need one [a, b] pair per corner label");
                for (std::size_t k = 0; k < labels; ++k) {
                    if (!table[k].is_array() || table[k].size() != 2)
                        throw ParseError(where + ": coefficient entries are [a, b] pairs");
                    row[k] = {detail::number(table[k][0], where), detail::number(table[k][1], where)};
                }
            }
            file.coefficients.table.push_back(std::move(row));
        }
    }

    file.model = CircuitModel(name, std::move(ocs), std::move(corner), std::move(specs), backend);

    if (backend == Backend::External) {
        if (root.contains("external")) {
            const auto& e = root["external"];
            if (e.contains("command")) file.external.command = detail::required<std::vector<std::string>>(e, "command", "external");
            if (e.contains("timeout_seconds"))
                file.external.timeout = std::chrono::milliseconds(
                    static_cast<long long>(1000.0 * detail::number(e["timeout_seconds"], "external timeout_seconds")));
        }
        if (const char* env = std::getenv(kSimulatorEnv); env && *env) file.external.command = detail::split_command(env);
    } else {
        // Validates base/coefficient tables eagerly.
        (void)file.synthetic();
    }
    return file;
}

namespace detail {

inline std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

// Serializes a circuit back to the same TOML subset.
inline std::string write_circuit(const CircuitFile& file) {
    const auto& m = file.model;
    std::ostringstream os;
    os << "name = " << detail::quoted(m.name()) << '\n';
    os << "backend = " << (m.backend() == Backend::Synthetic ? "\"synthetic\"" : "\"external\"") << '\n';
    for (const auto& oc : m.ocs())
        os << "\n[[oc]]\nname = " << detail::quoted(oc.name) << "\nmin = " << format_double(oc.min)
           << "\nmax = " << format_double(oc.max) << '\n';
    if (m.corner()) {
        const auto& c = *m.corner();
        os << "\n[corner]\nname = " << detail::quoted(c.name()) << "\nlabels = [";
        for (std::size_t i = 0; i < c.labels().size(); ++i) os << (i ? ", " : "") << detail::quoted(c.labels()[i]);
        os << "]\ncodes = [";
        for (std::size_t i = 0; i < c.codes().size(); ++i)
            os << (i ? ", " : "") << '[' << c.codes()[i].first << ", " << c.codes()[i].second << ']';
        os << "]\nvalid = [";
        const auto valid = c.valid_codes();
        for (std::size_t i = 0; i < valid.size(); ++i)
            os << (i ? ", " : "") << '[' << valid[i].first << ", " << valid[i].second << ']';
        os << "]\n";
    }
    for (std::size_t r = 0; r < m.specs().size(); ++r) {
        const auto& s = m.specs()[r];
        os << "\n[[response]]\nname = " << detail::quoted(s.name)
           << "\ndirection = " << (s.bound == Bound::Lower ? "\"lower\"" : "\"upper\"")
           << "\nthreshold = " << format_double(s.threshold) << '\n';
        if (m.backend() == Backend::Synthetic) {
            os << "base = \"" << to_string(file.bases[r]) << "\"\n";
            if (m.corner()) {
                os << "coefficients = [";
                const auto& row = file.coefficients.table[r];
                for (std::size_t k = 0; k < row.size(); ++k)
                    os << (k ? ", " : "") << '[' << format_double(row[k].a) << ", " << format_double(row[k].b) << ']';
                os << "]\n";
            }
        }
    }
    if (m.backend() == Backend::External) {
        os << "\n[external]\ncommand = [";
        for (std::size_t i = 0; i < file.external.command.size(); ++i)
            os << (i ? ", " : "") << detail::quoted(file.external.command[i]);
        os << "]\ntimeout_seconds = " << format_double(file.external.timeout.count() / 1000.0) << '\n';
    }
    return os.str();
}

}  // namespace wcsearch
