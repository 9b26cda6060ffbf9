#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "evtrack/accel_model.hpp"
#include "evtrack/energy.hpp"

using namespace evtrack;

TEST(Energy, LinearInCounts) {
    EnergyCoefficients c;
    c.pj = {{"mac", 2.0}, {"sram_read", 0.5}, {"sram_write", 1.0}, {"register", 0.25}, {"control", 4.0}};
    const ActivityCounts a{1000, 200, 100, 40, 10};
    const auto e = estimate_energy(a, c);
    EXPECT_DOUBLE_EQ(e.total(), (2000 + 100 + 100 + 10 + 40) * 1e-12);
    EXPECT_DOUBLE_EQ(e.mac, 2000e-12);
    ActivityCounts twice = a;
    twice += a;
    EXPECT_DOUBLE_EQ(estimate_energy(twice, c).total(), 2 * e.total());
}

TEST(Energy, MissingCoefficientIsAnError) {
    EnergyCoefficients c;
    c.pj = {{"mac", 1.0}};
    EXPECT_THROW(estimate_energy(ActivityCounts{1, 1, 0, 0, 0}, c), EnergyError);
    EXPECT_NO_THROW(estimate_energy(ActivityCounts{1, 0, 0, 0, 0}, c));
}

TEST(Energy, JsonRoundTripAndSchemaCheck) {
    EnergyCoefficients c;
    c.pj = {{"mac", 1.25}, {"control", 0.5}};
    c.leakage_mw = 0.2;
    c.note = "x";
    const auto back = coefficients_from_json(coefficients_to_json(c));
    EXPECT_EQ(back.pj, c.pj);
    EXPECT_DOUBLE_EQ(back.leakage_mw, 0.2);
    EXPECT_THROW(coefficients_from_json(R"({"schema_version": 2, "coefficients": {}})"), EnergyError);
    EXPECT_THROW(coefficients_from_json(R"({"schema_version": 1, "units": "nJ", "coefficients": {}})"), EnergyError);
    EXPECT_THROW(coefficients_from_json("nope"), EnergyError);
    EXPECT_THROW(load_coefficients("/nonexistent/coeffs.json"), EnergyError);
}

TEST(Energy, CalibrationHitsBothTargets) {
    const auto cfg = default_model_config();
    EnergyCoefficients probe;
    probe.pj = default_relative_coefficients();
    probe.pj["mac"] = 1.0;
    const auto r0 = simulate(cfg, HardwareConfig{}, SparsitySource::inject(0.0), probe);
    const auto r1 = simulate(cfg, HardwareConfig{}, SparsitySource::inject(0.4), probe);
    const auto c = calibrate_coefficients(r0.activity, r1.activity, default_relative_coefficients(), CalibrationTarget{});
    const double e0 = estimate_energy(r0.activity, c).total();
    const double e1 = estimate_energy(r1.activity, c).total();
    EXPECT_NEAR(e1, 18.9e-6, 1e-12);
    EXPECT_NEAR(1.0 - e1 / e0, 0.35, 1e-9);
    EXPECT_NEAR(c.pj.at("sram_write") / c.pj.at("sram_read"), 1.25, 1e-12);
    // A reduction beyond what MAC energy alone can deliver has no solution.
    CalibrationTarget t;
    t.sparsity_energy_reduction = 0.45;
    EXPECT_THROW(calibrate_coefficients(r0.activity, r1.activity, default_relative_coefficients(), t), EnergyError);
}

TEST(Energy, ShippedCoefficientsReproduceCalibration) {
    const auto c = load_default_coefficients();
    EXPECT_EQ(c.schema_version, 1);
    for (const char* k : {"mac", "sram_read", "sram_write", "register", "control"}) EXPECT_TRUE(c.pj.count(k)) << k;
    const auto r = simulate(default_model_config(), HardwareConfig{}, SparsitySource::inject(0.4), c);
    EXPECT_NEAR(r.energy.total(), 18.9e-6, 18.9e-6 * 1e-4);
}

TEST(Energy, EnvironmentOverridesDefaultPath) {
    const std::string path = ::testing::TempDir() + "evtrack_coeffs.json";
    EnergyCoefficients c;
    c.pj = {{"mac", 3.0}};
    std::ofstream(path) << coefficients_to_json(c);
    ::setenv("EVTRACK_COEFFICIENTS", path.c_str(), 1);
    EXPECT_EQ(default_coefficients_path(), path);
    EXPECT_EQ(load_default_coefficients().pj.at("mac"), 3.0);
    ::unsetenv("EVTRACK_COEFFICIENTS");
    EXPECT_NE(default_coefficients_path(), path);
}
