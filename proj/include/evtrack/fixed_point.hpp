#pragma once

#include <cstdint>
#include <string>

namespace evtrack {

// Two's-complement fixed-point format. int_bits includes the sign bit.
struct QFormat {
    int int_bits = 1;
    int frac_bits = 7;

    constexpr int total_bits() const { return int_bits + frac_bits; }
    constexpr int64_t min_raw() const { return -(int64_t{1} << (total_bits() - 1)); }
    constexpr int64_t max_raw() const { return (int64_t{1} << (total_bits() - 1)) - 1; }
    constexpr double scale() const { return static_cast<double>(int64_t{1} << frac_bits); }
    constexpr double min_value() const { return static_cast<double>(min_raw()) / scale(); }
    constexpr double max_value() const { return static_cast<double>(max_raw()) / scale(); }
    std::string name() const;

    friend constexpr bool operator==(const QFormat&, const QFormat&) = default;
};

inline constexpr QFormat kWeightFmt{1, 7};       // Q1.7, int8
inline constexpr QFormat kActivationFmt{5, 11};  // Q5.11, int16
inline constexpr QFormat kAccumFmt{14, 18};      // 32-bit, 18 fractional bits

// Shift between the accumulator scale and the activation scale.
inline constexpr int kAccToActShift = kAccumFmt.frac_bits - kActivationFmt.frac_bits;

struct FixedVal {
    int64_t raw = 0;
    QFormat fmt = kActivationFmt;

    double value() const { return static_cast<double>(raw) / fmt.scale(); }
};

// Counts saturation events. Not thread-safe; use one per worker.
struct SatCounter {
    uint64_t count = 0;
    void hit() { ++count; }
};

// Round-half-to-even of v / 2^shift (shift >= 0).
int64_t round_shift_half_even(int64_t v, int shift);

int64_t saturate(int64_t v, const QFormat& fmt, SatCounter* sat = nullptr);
int32_t saturate32(int64_t v, SatCounter* sat = nullptr);
int16_t saturate16(int64_t v, SatCounter* sat = nullptr);

// x must be finite; throws std::domain_error otherwise.
FixedVal quantize(double x, const QFormat& fmt, SatCounter* sat = nullptr);
double dequantize(const FixedVal& v);
inline double dequantize(int64_t raw, const QFormat& fmt) { return static_cast<double>(raw) / fmt.scale(); }

// acc + w*a with a saturating 32-bit add. w is Q1.7, a is Q5.11.
int32_t mac(int8_t w, int16_t a, int32_t acc, SatCounter* sat = nullptr);
int32_t add_sat32(int32_t a, int32_t b, SatCounter* sat = nullptr);

// Accumulator (18 frac bits) to Q5.11: drop 7 bits half-to-even, saturate.
int16_t truncate_to_activation(int32_t acc, SatCounter* sat = nullptr);

// Q5.11 x Q5.11 -> Q5.11 with convergent rounding.
int16_t mul_activation(int16_t a, int16_t b, SatCounter* sat = nullptr);

// f*prev + (1-f)*cand in Q5.11 with a single rounding step. f is in [0, 2048].
int16_t blend(int16_t f, int16_t prev, int16_t cand, SatCounter* sat = nullptr);

}  // namespace evtrack
