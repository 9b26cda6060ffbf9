#include "evtrack/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evtrack {

std::string QFormat::name() const {
    return "Q" + std::to_string(int_bits) + "." + std::to_string(frac_bits);
}

int64_t round_shift_half_even(int64_t v, int shift) {
    if (shift <= 0) return v;
    const int64_t q = v >> shift;  // floor
    const int64_t rem = v - (q << shift);
    const int64_t half = int64_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1))) return q + 1;
    return q;
}

int64_t saturate(int64_t v, const QFormat& fmt, SatCounter* sat) {
    if (v > fmt.max_raw()) {
        if (sat) sat->hit();
        return fmt.max_raw();
    }
    if (v < fmt.min_raw()) {
        if (sat) sat->hit();
        return fmt.min_raw();
    }
    return v;
}

int32_t saturate32(int64_t v, SatCounter* sat) {
    constexpr int64_t lo = std::numeric_limits<int32_t>::min();
    constexpr int64_t hi = std::numeric_limits<int32_t>::max();
    if (v > hi) {
        if (sat) sat->hit();
        return static_cast<int32_t>(hi);
    }
    if (v < lo) {
        if (sat) sat->hit();
        return static_cast<int32_t>(lo);
    }
    return static_cast<int32_t>(v);
}

int16_t saturate16(int64_t v, SatCounter* sat) {
    return static_cast<int16_t>(saturate(v, kActivationFmt, sat));
}

FixedVal quantize(double x, const QFormat& fmt, SatCounter* sat) {
    if (!std::isfinite(x)) throw std::domain_error("quantize: non-finite input");
    const double scaled = std::ldexp(x, fmt.frac_bits);
    // nearbyint honours the default FE_TONEAREST mode, which is half-to-even.
    const double lim = std::ldexp(1.0, fmt.total_bits());
    double r;
    if (scaled > lim) r = lim;
    else if (scaled < -lim) r = -lim;
    else r = std::nearbyint(scaled);
    return FixedVal{saturate(static_cast<int64_t>(r), fmt, sat), fmt};
}

double dequantize(const FixedVal& v) { return v.value(); }

int32_t add_sat32(int32_t a, int32_t b, SatCounter* sat) {
    return saturate32(int64_t{a} + int64_t{b}, sat);
}

int32_t mac(int8_t w, int16_t a, int32_t acc, SatCounter* sat) {
    return saturate32(int64_t{acc} + int64_t{w} * int64_t{a}, sat);
}

int16_t truncate_to_activation(int32_t acc, SatCounter* sat) {
    return saturate16(round_shift_half_even(acc, kAccToActShift), sat);
}

int16_t mul_activation(int16_t a, int16_t b, SatCounter* sat) {
    const int64_t p = int64_t{a} * int64_t{b};
    return saturate16(round_shift_half_even(p, kActivationFmt.frac_bits), sat);
}

int16_t blend(int16_t f, int16_t prev, int16_t cand, SatCounter* sat) {
    constexpr int64_t one = int64_t{1} << kActivationFmt.frac_bits;
    const int64_t p = int64_t{f} * prev + (one - f) * int64_t{cand};
    return saturate16(round_shift_half_even(p, kActivationFmt.frac_bits), sat);
}

}  // namespace evtrack
