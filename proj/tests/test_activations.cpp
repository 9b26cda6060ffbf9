#include <gtest/gtest.h>

#include <cmath>

#include "evtrack/activations.hpp"
#include "oracles.hpp"

using namespace evtrack;

TEST(Activations, ExhaustiveAgainstPiecewiseDefinition) {
    for (int r = -32768; r <= 32767; ++r) {
        const auto x = static_cast<int16_t>(r);
        ASSERT_EQ(act::hardsigmoid(x), oracle::hardsigmoid(x)) << r;
        ASSERT_EQ(act::hardtanh(x), oracle::hardtanh(x)) << r;
        ASSERT_EQ(act::relu(x), r > 0 ? r : 0);
        ASSERT_EQ(act::apply(ActivationKind::bypass, x), x);
    }
}

TEST(Activations, MonotoneAndInRange) {
    int16_t prev_s = act::hardsigmoid(-32768);
    int16_t prev_t = act::hardtanh(-32768);
    for (int r = -32768; r <= 32767; ++r) {
        const auto x = static_cast<int16_t>(r);
        const int16_t s = act::hardsigmoid(x);
        const int16_t t = act::hardtanh(x);
        ASSERT_GE(s, prev_s);
        ASSERT_GE(t, prev_t);
        ASSERT_GE(s, 0);
        ASSERT_LE(s, 2048);
        ASSERT_GE(t, -2048);
        ASSERT_LE(t, 2048);
        prev_s = s;
        prev_t = t;
    }
}

TEST(Activations, JoinsAreContinuous) {
    EXPECT_EQ(act::hardsigmoid(-8192), 0);
    EXPECT_EQ(act::hardsigmoid(8192), 2048);
    EXPECT_EQ(act::hardsigmoid(0), 1024);
    EXPECT_EQ(act::hardtanh(-4096), -2048);
    EXPECT_EQ(act::hardtanh(4096), 2048);
    EXPECT_EQ(act::hardtanh(0), 0);
}

TEST(Activations, HardtanhSymmetryUnderFloorShift) {
    // Exact on even raws; odd negative raws sit one ulp lower because the
    // shift floors.
    for (int r = -32767; r <= 32767; ++r) {
        const auto x = static_cast<int16_t>(r);
        const auto nx = static_cast<int16_t>(-r);
        const int d = act::hardtanh(nx) + act::hardtanh(x);
        if (r % 2 == 0 || std::abs(r) > 4096) ASSERT_EQ(d, 0) << r;
        else ASSERT_EQ(std::abs(d), 1) << r;
    }
}

TEST(Activations, FixedMatchesRealFormsOnTheLattice) {
    for (int r = -32768; r <= 32767; r += 8) {
        const double x = r / 2048.0;
        EXPECT_DOUBLE_EQ(act::hardsigmoid(static_cast<int16_t>(r)) / 2048.0, ref::hardsigmoid(x));
    }
    for (int r = -32768; r <= 32767; r += 2) {
        const double x = r / 2048.0;
        EXPECT_DOUBLE_EQ(act::hardtanh(static_cast<int16_t>(r)) / 2048.0, ref::hardtanh(x));
    }
}

TEST(Activations, ApproximationErrorAgainstSmoothFunctions) {
    const auto s = ref::hardsigmoid_vs_sigmoid(-8, 8, 16001);
    const auto t = ref::hardtanh_vs_tanh(-4, 4, 8001);
    const auto g = ref::relu_vs_gelu(-4, 4, 8001);
    // Largest gaps sit where the smooth slope equals the linear one.
    const double ss = (1.0 + std::sqrt(0.5)) / 2.0;
    EXPECT_NEAR(s.max_abs, ss - std::log(ss / (1.0 - ss)) / 8.0 - 0.5, 1e-6);
    EXPECT_NEAR(t.max_abs, std::sqrt(0.5) - std::atanh(std::sqrt(0.5)) / 2.0, 1e-6);
    EXPECT_NEAR(g.max_abs, 0.16997, 1e-3);
}

TEST(Activations, NamesRoundTrip) {
    for (auto k : {ActivationKind::bypass, ActivationKind::relu, ActivationKind::hardsigmoid, ActivationKind::hardtanh})
        EXPECT_EQ(activation_from_string(to_string(k)), k);
    EXPECT_THROW(activation_from_string("gelu"), std::invalid_argument);
}
