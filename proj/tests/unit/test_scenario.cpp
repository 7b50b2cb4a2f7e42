#include <gtest/gtest.h>

#include <cmath>

#include "nfsim/error.hpp"
#include "nfsim/scenario.hpp"

using namespace nfsim;

namespace {

const char* kMinimal = R"({
  "physics": {"wavelength": 0.010714, "aperture_diameter": 0.06, "element_pitch": 0.005357},
  "layers": {"count": 2, "spacing": 0.05357},
  "sweep": {"num_points": 8}
})";

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Scenario, MinimalDocumentDefaults) {
    SystemConfig c = parse_scenario(kMinimal);
    EXPECT_EQ(c.layer_count, 2);
    ASSERT_EQ(c.layer_spacings.size(), 1u);
    EXPECT_EQ(c.layer_spacings[0], 0.05357);
    EXPECT_EQ(c.sweep.num_points, 8);
    EXPECT_NEAR(c.feed.feed_distance, 0.2 * 0.06, 1e-15);
    EXPECT_EQ(c.thresholds.lateral_retention, 0.958);
    EXPECT_EQ(c.thresholds.axial_retention, 0.8);
}

TEST(Scenario, FrequencyConvertsToWavelength) {
    SystemConfig c = parse_scenario(R"({"physics": {"frequency_hz": 28e9, "aperture_diameter": 0.06,
        "element_pitch": 0.005}, "layers": {"count": 1}, "sweep": {}})");
    EXPECT_NEAR(c.wavelength, 299792458.0 / 28e9, 1e-18);
}

TEST(Scenario, UnknownKeyNamed) {
    std::string m = message_of([] {
        parse_scenario(R"({"physics": {"wavelength": 0.01, "aperture_diameter": 0.06, "element_pitch": 0.005,
            "colour": 1}, "layers": {"count": 1}, "sweep": {}})");
    });
    EXPECT_NE(m.find("physics.colour"), std::string::npos) << m;
    m = message_of([] { parse_scenario(kMinimal, {"sweep.nump=3"}); });
    EXPECT_NE(m.find("nump"), std::string::npos) << m;
}

TEST(Scenario, MissingBlocksAndBadValues) {
    EXPECT_THROW(parse_scenario(R"({"physics": {"wavelength": 0.01, "aperture_diameter": 0.06,
        "element_pitch": 0.005}, "layers": {"count": 1}})"), ConfigError);
    EXPECT_THROW(parse_scenario("not json"), ConfigError);
    EXPECT_THROW(parse_scenario(kMinimal, {"layers.count=0"}), ConfigError);
    EXPECT_THROW(parse_scenario(kMinimal, {"physics.element_pitch=1.0"}), ConfigError);
    EXPECT_THROW(parse_scenario(kMinimal, {"imperfections.transmission_efficiency=1.5"}), ConfigError);
    EXPECT_THROW(parse_scenario(kMinimal, {"sweep.spacing=\"log\""}), ConfigError);
    EXPECT_THROW(parse_scenario(kMinimal, {"noequals"}), ConfigError);
    EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(Scenario, OverridesApply) {
    SystemConfig c = parse_scenario(kMinimal, {"layers.count=4", "imperfections.phase_bits=2",
                                               "sweep.layer_counts=[1,3]", "feed.kind=uniform_plane"});
    EXPECT_EQ(c.layer_count, 4);
    EXPECT_EQ(c.layer_spacings.size(), 3u);
    EXPECT_EQ(c.imperfections.phase_bits, 2);
    EXPECT_EQ(c.sweep.layer_counts, (std::vector<int>{1, 3}));
    EXPECT_EQ(c.feed.kind, FeedKind::uniform_plane);
}

TEST(Scenario, CanonicalJsonRoundTripKeepsHash) {
    SystemConfig c = parse_scenario(kMinimal, {"imperfections.misalignment=0.001"});
    SystemConfig d = parse_scenario(scenario_to_json(c));
    EXPECT_EQ(scenario_hash(c), scenario_hash(d));
    EXPECT_EQ(scenario_to_json(c), scenario_to_json(d));
    EXPECT_EQ(scenario_hash_hex(c).size(), 16u);
    SystemConfig e = parse_scenario(kMinimal, {"imperfections.misalignment=0.002"});
    EXPECT_NE(scenario_hash(c), scenario_hash(e));
}

TEST(Scenario, ShippedFilesLoad) {
    for (const char* name : {"default.json", "wide_28ghz.json", "imperfect.json"}) {
        SystemConfig c = load_scenario(std::string(NFSIM_SCENARIO_DIR) + "/" + name);
        EXPECT_NO_THROW(c.validate()) << name;
    }
}

TEST(Scenario, WithLayersRebuildsSpacings) {
    SystemConfig c = parse_scenario(kMinimal);
    SystemConfig c5 = c.with_layers(5);
    EXPECT_EQ(c5.layer_count, 5);
    EXPECT_EQ(c5.layer_spacings, std::vector<double>(4, 0.05357));
    EXPECT_TRUE(c.with_layers(1).layer_spacings.empty());
}

TEST(Scenario, SweepDistances) {
    SweepPlan p;
    p.r_min_frac = 0.1;
    p.r_max_frac = 0.4;
    p.num_points = 3;
    p.spacing = SweepSpacing::geometric;
    auto g = sweep_distances(p, 10.0);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_NEAR(g[0], 1.0, 1e-15);
    EXPECT_NEAR(g[1], 2.0, 1e-14);
    EXPECT_NEAR(g[2], 4.0, 1e-14);
    p.spacing = SweepSpacing::linear;
    auto l = sweep_distances(p, 10.0);
    EXPECT_NEAR(l[1], 2.5, 1e-15);
}
