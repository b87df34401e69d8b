#include "dmk/config.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace dmk;

namespace {

std::string message_of(const std::string& text) {
    try {
        (void)parse_config_string(text, "t.ini");
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Config, ScenarioDefaults) {
    const auto r = parse_config_string("[scenario]\nname = radial\n");
    EXPECT_EQ(r.mesh.source, MeshSource::disk_polar);
    EXPECT_EQ(r.levels, 3);
    EXPECT_EQ(r.sim.beta, 0.5);
    EXPECT_EQ(r.forcing.quadrature, 8);

    const auto t = parse_config_string("[scenario]\nname = tc3\n");
    EXPECT_EQ(t.mesh.source, MeshSource::unit_square);
    EXPECT_EQ(t.branch.threshold, 1e-6);
    EXPECT_EQ(t.sim.solver.tol, 1e-9);
}

TEST(Config, ValuesOverrideDefaults) {
    const auto c = parse_config_string(R"(
[scenario]
name = tc2   ; inline comment
levels = 2
[mesh]
n = 12
[dynamics]
beta = 1.25
clamp = false
[solver]
preconditioner = jacobi
[initial]
type = checkerboard
n = 3
[forcing]
seed = 7
count = 10
)");
    EXPECT_EQ(c.scenario, Scenario::tc2);
    EXPECT_EQ(c.levels, 2);
    EXPECT_EQ(c.mesh.n, 12);
    EXPECT_EQ(c.sim.beta, 1.25);
    EXPECT_FALSE(c.sim.clamp);
    EXPECT_EQ(c.sim.solver.preconditioner, Preconditioner::jacobi);
    ASSERT_TRUE(std::holds_alternative<ic::Checkerboard>(c.sim.initial));
    EXPECT_EQ(std::get<ic::Checkerboard>(c.sim.initial).n, 3);
    EXPECT_EQ(c.forcing.seed, 7u);
    EXPECT_EQ(c.forcing.count, 10);
}

TEST(Config, NonpositiveBetaNamesKey) {
    for (const char* b : {"0", "-1"}) {
        const auto msg = message_of(std::string("[scenario]\nname = tc1\n[dynamics]\nbeta = ") + b + "\n");
        EXPECT_NE(msg.find("dynamics.beta"), std::string::npos) << msg;
        EXPECT_NE(msg.find("t.ini:4"), std::string::npos) << msg;
    }
}

TEST(Config, UnknownKeysAndSectionsAreRejected) {
    auto msg = message_of("[scenario]\nname = tc1\n[dynamics]\nbeta = 1\nbta = 2\n");
    EXPECT_NE(msg.find("dynamics.bta"), std::string::npos) << msg;
    msg = message_of("[scenario]\nname = tc1\n[dynamcs]\nbeta = 1\n");
    EXPECT_NE(msg.find("dynamcs"), std::string::npos) << msg;
}

TEST(Config, MalformedInputReportsLine) {
    try {
        (void)parse_config_string("[scenario]\nname = tc1\nthis is not a pair\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW((void)parse_config_string("[scenario]\nname = tc1\n[dynamics]\nbeta = abc\n"), ConfigError);
    EXPECT_THROW((void)parse_config_string("[scenario]\nname = nowhere\n"), ConfigError);
    EXPECT_THROW((void)parse_config_string("[scenario]\nname = tc1\n[dynamics]\nbeta = 1\nbeta = 2\n"), ConfigError);
}

TEST(Config, CustomForcingNeedsExactlyOneKind) {
    EXPECT_THROW((void)parse_config_string("[scenario]\nname = custom\n"), ConfigError);
    const auto c = parse_config_string(
        "[scenario]\nname = custom\n[mesh]\ngenerator = unit_square\nn = 4\n[forcing]\nbox = 0 0.5 0 1 1\nbox = 0.5 1 0 1 -1\n");
    ASSERT_EQ(c.forcing.boxes.size(), 2u);
    EXPECT_EQ(c.forcing.boxes[1].value, -1.0);
    EXPECT_THROW((void)parse_config_string("[scenario]\nname = tc1\n[forcing]\nbox = 0 1 0 1 1\n"), ConfigError);
}

TEST(Config, FormatParseRoundTrip) {
    for (const char* name : {"radial", "tc1", "tc2", "tc3"}) {
        auto c = parse_config_string(std::string("[scenario]\nname = ") + name + "\n");
        c.sim.beta = 0.1 + 0.2;
        c.sim.initial = ic::YTube{0.25, 0.03, 1e-4};
        const auto text = format_config(c);
        const auto back = parse_config_string(text);
        EXPECT_EQ(format_config(back), text) << name;
        EXPECT_EQ(back.sim.beta, c.sim.beta);
    }
    const auto custom = parse_config_string(
        "[scenario]\nname = custom\n[mesh]\ngenerator = unit_square\n[forcing]\ndirac = 0.2 0.2 1\ndirac = 0.8 0.8 -1\n");
    EXPECT_EQ(format_config(parse_config_string(format_config(custom))), format_config(custom));
}

TEST(Config, ShippedConfigsParse) {
    for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(DMK_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".ini") continue;
        EXPECT_NO_THROW((void)load_config(e.path())) << e.path();
    }
    EXPECT_THROW((void)load_config("/nonexistent/x.ini"), IoError);
}
