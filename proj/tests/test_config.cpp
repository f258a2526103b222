#include "salience/common.hpp"
#include "salience/config.hpp"

#include <doctest.h>

using namespace salience;

TEST_CASE("ini parsing with sections, comments and overrides") {
    auto cfg = ConfigFile::parse_string(R"(
# top comment
alpha = 1.5
[first]
name = hello   # trailing comment
count = 42
[second]
flag = yes
)");
    CHECK(cfg.get("", "alpha") == "1.5");
    CHECK(cfg.get("first", "name") == "hello");
    CHECK(cfg.get_int("first", "count", 0) == 42);
    CHECK(cfg.get_or("second", "missing", "fallback") == "fallback");
    CHECK(cfg.get_double("", "alpha", 0.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(cfg.get("first", "missing"), ConfigError);
    CHECK_THROWS_AS(cfg.get("nope", "x"), ConfigError);
}

TEST_CASE("malformed config lines are rejected") {
    CHECK_THROWS_AS(ConfigFile::parse_string("[unterminated\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("just a bare line\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("= value\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("[s]\ncount = twelve\n").get_int("s", "count", 0),
                    ConfigError);
}

TEST_CASE("default simulation config parses into six calibrated profiles") {
    auto cfg = ConfigFile::parse_string(default_simulation_config());
    SimulationConfig sim = parse_simulation_config(cfg);
    CHECK(sim.profiles.size() == 6);
    CHECK(sim.per_object_priors.size() == 6);
    CHECK(sim.n_per_object == 1000);

    for (std::size_t i = 0; i < sim.profiles.size(); ++i) {
        const auto& p = sim.profiles[i];
        CHECK(p.noise_sd > 0.0);
        // Offsets were solved so the link hits the medians at the calibration point.
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
            double signed_gain = (m == kAbsence) ? -p.behaviour_gain[m] : p.behaviour_gain[m];
            double level = softplus(p.link_offset[m] + signed_gain * p.calibration_v);
            CHECK(level == doctest::Approx(p.target_medians[m]).epsilon(1e-9));
        }
    }
}

TEST_CASE("simulation config with per-object overrides") {
    auto cfg = ConfigFile::parse_string(R"(
[population]
n_per_object = 10
gamma = 0.5
churn_min = 0.1
churn_max = 0.2

[object.a]
median_absence = 1
median_session_time = 10
median_active_time = 50
median_activity = 5
churn_min = 0.3
churn_max = 0.4

[object.b]
median_absence = 1
median_session_time = 10
median_active_time = 50
median_activity = 5
)");
    SimulationConfig sim = parse_simulation_config(cfg);
    REQUIRE(sim.per_object_priors.size() == 2);
    CHECK(sim.per_object_priors[0].churn_min == doctest::Approx(0.3));
    CHECK(sim.per_object_priors[1].churn_min == doctest::Approx(0.1));
    CHECK(sim.per_object_priors[0].gamma == doctest::Approx(0.5));
}

TEST_CASE("simulation config without objects is rejected") {
    auto cfg = ConfigFile::parse_string("[population]\nn_per_object = 5\n");
    CHECK_THROWS_AS(parse_simulation_config(cfg), ConfigError);
}
