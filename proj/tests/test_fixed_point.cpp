#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "evtrack/fixed_point.hpp"
#include "oracles.hpp"

using namespace evtrack;

TEST(FixedPoint, FormatsMatchDeclaredWidths) {
    EXPECT_EQ(kWeightFmt.total_bits(), 8);
    EXPECT_EQ(kActivationFmt.total_bits(), 16);
    EXPECT_EQ(kAccumFmt.total_bits(), 32);
    EXPECT_EQ(kWeightFmt.frac_bits + kActivationFmt.frac_bits, kAccumFmt.frac_bits);
    EXPECT_EQ(kAccToActShift, 7);
    EXPECT_DOUBLE_EQ(kWeightFmt.max_value(), 127.0 / 128.0);
    EXPECT_DOUBLE_EQ(kActivationFmt.min_value(), -16.0);
}

TEST(FixedPoint, RoundShiftMatchesExactOracle) {
    for (int s = 0; s <= 12; ++s)
        for (int64_t v = -5000; v <= 5000; ++v) ASSERT_EQ(round_shift_half_even(v, s), oracle::round_half_even_pow2(v, s)) << v << ">>" << s;
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int64_t> d(-(int64_t{1} << 50), int64_t{1} << 50);
    for (int i = 0; i < 200000; ++i) {
        const int64_t v = d(rng);
        const int s = static_cast<int>(rng() % 20);
        ASSERT_EQ(round_shift_half_even(v, s), oracle::round_half_even_pow2(v, s));
    }
}

TEST(FixedPoint, TiesGoToEven) {
    EXPECT_EQ(round_shift_half_even(64, 7), 0);
    EXPECT_EQ(round_shift_half_even(192, 7), 2);
    EXPECT_EQ(round_shift_half_even(-64, 7), 0);
    EXPECT_EQ(round_shift_half_even(-192, 7), -2);
    EXPECT_EQ(round_shift_half_even(65, 7), 1);
}

TEST(FixedPoint, ConvergentRoundingIsUnbiasedOverResidues) {
    // Over all 2^7 residues of an even and an odd quotient, the total error is zero.
    for (int64_t base : {int64_t{0}, int64_t{-6}, int64_t{1000}}) {
        int64_t err = 0;
        for (int64_t q : {base, base + 1})
            for (int64_t r = 0; r < 128; ++r) {
                const int64_t v = q * 128 + r;
                err += round_shift_half_even(v, 7) * 128 - v;
            }
        EXPECT_EQ(err, 0) << base;
    }
}

TEST(FixedPoint, QuantizeIsWithinHalfUlpOfClampedValue) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-40.0, 40.0);
    for (const QFormat& f : {kWeightFmt, kActivationFmt}) {
        const double half = std::ldexp(1.0, -f.frac_bits - 1);
        for (int i = 0; i < 100000; ++i) {
            const double x = i < 50000 ? d(rng) : d(rng) / 40.0;
            const double c = std::clamp(x, f.min_value(), f.max_value());
            const double v = dequantize(quantize(x, f));
            ASSERT_LE(std::abs(v - c), half) << x;
        }
    }
}

TEST(FixedPoint, QuantizeCountsSaturationAndRejectsNonFinite) {
    SatCounter sat;
    EXPECT_EQ(quantize(3.0, kWeightFmt, &sat).raw, 127);
    EXPECT_EQ(quantize(-3.0, kWeightFmt, &sat).raw, -128);
    EXPECT_EQ(quantize(0.5, kWeightFmt, &sat).raw, 64);
    EXPECT_EQ(sat.count, 2u);
    EXPECT_THROW(quantize(std::numeric_limits<double>::quiet_NaN(), kWeightFmt), std::domain_error);
    EXPECT_THROW(quantize(std::numeric_limits<double>::infinity(), kActivationFmt), std::domain_error);
    // Ties to even at the quantization step.
    EXPECT_EQ(quantize(1.5 / 128.0, kWeightFmt).raw, 2);
    EXPECT_EQ(quantize(2.5 / 128.0, kWeightFmt).raw, 2);
}

TEST(FixedPoint, MacSaturatesAndCounts) {
    SatCounter sat;
    EXPECT_EQ(mac(-128, -32768, INT32_MAX - 10, &sat), INT32_MAX);
    EXPECT_EQ(mac(127, -32768, INT32_MIN + 5, &sat), INT32_MIN);
    EXPECT_EQ(sat.count, 2u);
    EXPECT_EQ(mac(3, 5, 7, &sat), 22);
    EXPECT_EQ(sat.count, 2u);
    EXPECT_EQ(add_sat32(INT32_MAX, 1, &sat), INT32_MAX);
    EXPECT_EQ(sat.count, 3u);
}

TEST(FixedPoint, TruncationMatchesOracleOnRandomAccumulators) {
    std::mt19937 rng(5);
    for (int i = 0; i < 500000; ++i) {
        const int32_t acc = static_cast<int32_t>(rng());
        const int64_t want = oracle::clamp(oracle::round_half_even_pow2(acc, 7), -32768, 32767);
        ASSERT_EQ(truncate_to_activation(acc), want) << acc;
    }
}

TEST(FixedPoint, MulActivationMatchesOracle) {
    std::mt19937 rng(9);
    for (int i = 0; i < 500000; ++i) {
        const auto a = static_cast<int16_t>(rng());
        const auto b = static_cast<int16_t>(rng());
        const int64_t want = oracle::clamp(oracle::round_half_even_pow2(int64_t{a} * b, 11), -32768, 32767);
        ASSERT_EQ(mul_activation(a, b), want);
    }
}

TEST(FixedPoint, BlendIsAConvexCombination) {
    std::mt19937 rng(13);
    for (int i = 0; i < 300000; ++i) {
        const auto f = static_cast<int16_t>(rng() % 2049);
        const auto p = static_cast<int16_t>(rng());
        const auto c = static_cast<int16_t>(rng());
        const int16_t r = blend(f, p, c);
        const int64_t want = oracle::round_half_even_pow2(int64_t{f} * p + int64_t{2048 - f} * c, 11);
        ASSERT_EQ(r, want);
        ASSERT_GE(r, std::min(p, c));
        ASSERT_LE(r, std::max(p, c));
    }
    EXPECT_EQ(blend(2048, 100, -700), 100);
    EXPECT_EQ(blend(0, 100, -700), -700);
}

TEST(FixedPoint, SaturateHelpers) {
    SatCounter sat;
    EXPECT_EQ(saturate16(40000, &sat), 32767);
    EXPECT_EQ(saturate16(-40000, &sat), -32768);
    EXPECT_EQ(saturate32(int64_t{1} << 40, &sat), INT32_MAX);
    EXPECT_EQ(saturate(200, kWeightFmt, &sat), 127);
    EXPECT_EQ(sat.count, 4u);
    EXPECT_EQ(saturate(-5, kWeightFmt, &sat), -5);
    EXPECT_EQ(sat.count, 4u);
}
