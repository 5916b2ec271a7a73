#include <gtest/gtest.h>

#include <cstdlib>

#include "test_support.hpp"
#include "wcsearch/circuit_file.hpp"

using namespace wcsearch;
using wcsearch::testing::load;

namespace {

const char* kMinimal = R"(
name = "tiny"   # trailing comment
[[oc]]
name = "a"
min = -1
max = 2.5e0

[[response]]
name = "R"
direction = "upper"
threshold = 1_000.5
base = "affine"
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return text.replace(pos, from.size(), to);
}

}  // namespace


TEST(Toml, SupportedValues) {
    const auto j = toml::parse(
        "a = 1\nb = -2.5\nc = \"x\\\"y\"\nd = [1, [2, 3],\n  4, # note\n]\ne = true\n\"quoted key\" = false\n"
        "[t]\nk = +7\n\n[[arr]]\nv = 1\n[[arr]]\nv = 2\r\n");
    EXPECT_EQ(j["a"], 1);
    EXPECT_TRUE(j["a"].is_number_integer());
    EXPECT_EQ(j["b"], -2.5);
    EXPECT_EQ(j["c"], "x\"y");
    EXPECT_EQ(j["d"].dump(), "[1,[2,3],4]");
    EXPECT_EQ(j["e"], true);
    EXPECT_EQ(j["quoted key"], false);
    EXPECT_EQ(j["t"]["k"], 7);
    EXPECT_EQ(j["arr"].size(), 2);
    EXPECT_EQ(j["arr"][1]["v"], 2);
}

TEST(Toml, SyntaxErrorsCarryLineNumbers) {
    for (const char* bad : {"a = \"open\n", "a = 1\na = 2\n", "a 1\n", "[t\n", "a = [1 2]\n", "a = 1 b\n",
                            "[t]\n[t]\n", "a = 12x\n", "a = {x = 1}\n"}) {
        EXPECT_THROW(toml::parse(bad), ParseError) << bad;
    }
    try {
        toml::parse("a = 1\n\nb = ?\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(CircuitFile, CommittedCircuitsParse) {
    const auto s7 = load("circuits/synth7.toml");
    EXPECT_EQ(s7.model.continuous_dims(), 7);
    EXPECT_EQ(s7.model.dimension(), 9);
    ASSERT_EQ(s7.model.specs().size(), 3);
    EXPECT_EQ(s7.model.specs()[0].name, "GM");
    EXPECT_EQ(s7.model.specs()[0].threshold, 8.0);
    EXPECT_EQ(s7.model.specs()[2].bound, Bound::Upper);
    EXPECT_EQ(s7.model.specs()[2].threshold, -26.0);
    EXPECT_EQ(s7.bases, (std::vector<BaseFunction>{BaseFunction::Multimodal, BaseFunction::Ridge, BaseFunction::Interaction}));
    EXPECT_EQ(s7.model.corner()->labels().size(), 6);
    const auto nominal = s7.model.corner()->index_of("nominal");
    for (const auto& row : s7.coefficients.table) {
        EXPECT_EQ(row[nominal].a, 1.0);
        EXPECT_EQ(row[nominal].b, 0.0);
        for (const auto& c : row) {
            EXPECT_GE(c.a, 0.9);
            EXPECT_LE(c.a, 1.1);
        }
    }
    EXPECT_EQ(load("circuits/synth2.toml").model.continuous_dims(), 2);
}

TEST(CircuitFile, ExternalCommandAndEnvironmentOverride) {
    ::unsetenv(kSimulatorEnv);
    const auto l2 = load("circuits/l2_external.toml");
    EXPECT_EQ(l2.model.backend(), Backend::External);
    EXPECT_EQ(l2.external.command, (std::vector<std::string>{"l2-simulator"}));
    EXPECT_EQ(l2.external.timeout, std::chrono::seconds(600));
    EXPECT_THROW(l2.synthetic(), UnsupportedBackendError);
    ::setenv(kSimulatorEnv, "/opt/sim --fast", 1);
    const auto overridden = load("circuits/l2_external.toml");
    ::unsetenv(kSimulatorEnv);
    EXPECT_EQ(overridden.external.command, (std::vector<std::string>{"/opt/sim", "--fast"}));
}

TEST(CircuitFile, MinimalDefaults) {
    const auto f = parse_circuit(kMinimal);
    EXPECT_EQ(f.model.name(), "tiny");
    EXPECT_EQ(f.model.backend(), Backend::Synthetic);
    EXPECT_FALSE(f.model.corner().has_value());
    EXPECT_EQ(f.model.ocs()[0].min, -1.0);
    EXPECT_EQ(f.model.ocs()[0].max, 2.5);
    EXPECT_EQ(f.model.specs()[0].threshold, 1000.5);
    EXPECT_EQ(f.coefficients.table[0].size(), 1);
}

TEST(CircuitFile, WriteParseRoundTrip) {
    for (const char* path : {"circuits/synth7.toml", "circuits/synth2.toml", "circuits/l2_external.toml"}) {
        ::unsetenv(kSimulatorEnv);
        const auto f = load(path);
        const auto text = write_circuit(f);
        const auto g = parse_circuit(text);
        EXPECT_EQ(write_circuit(g), text) << path;
        EXPECT_EQ(g.model.dimension(), f.model.dimension());
        for (std::size_t r = 0; r < f.coefficients.table.size(); ++r)
            for (std::size_t k = 0; k < f.coefficients.table[r].size(); ++k) {
                EXPECT_EQ(g.coefficients.table[r][k].a, f.coefficients.table[r][k].a);
                EXPECT_EQ(g.coefficients.table[r][k].b, f.coefficients.table[r][k].b);
            }
    }
}

TEST(CircuitFile, FieldErrors) {
    const std::string base = kMinimal;
    EXPECT_THROW(parse_circuit(replace(base, "name = \"tiny\"", "")), ParseError);
    EXPECT_THROW(parse_circuit(replace(base, "\"upper\"", "\"sideways\"")), ParseError);
    EXPECT_THROW(parse_circuit(replace(base, "\"affine\"", "\"sinc\"")), ValidationError);
    EXPECT_THROW(parse_circuit(replace(base, "max = 2.5e0", "max = -3")), ValidationError);
    EXPECT_THROW(parse_circuit(replace(base, "min = -1", "min = \"low\"")), ParseError);
    EXPECT_THROW(parse_circuit(replace(base, "min = -1", "min = inf")), ParseError);
    EXPECT_THROW(parse_circuit(replace(base, "base = \"affine\"", "base = \"affine\"\ncoefficients = [[1, 0], [1, 0]]")),
                 ParseError);
    EXPECT_THROW(parse_circuit(replace(base, "name = \"tiny\"", "name = \"tiny\"\nbackend = \"spice\"")), ParseError);
    EXPECT_THROW(parse_circuit(replace(base, "[[response]]", "[[oc]]\nname = \"a\"\nmin = 0\nmax = 1\n[[response]]")),
                 ValidationError);
    auto s2 = read_file(wcsearch::testing::source_path("circuits/synth2.toml"));
    EXPECT_THROW(parse_circuit(replace(s2, "[1, 2]]\nvalid", "[1, 1]]\nvalid")), ValidationError);
    EXPECT_THROW(parse_circuit(replace(s2, "[0.95, 0.20]", "[0.0, 0.20]")), ValidationError);
    EXPECT_THROW(parse_circuit(replace(s2, "[0.95, 0.20]", "[0.95]")), ParseError);
}
