#pragma once

// Independent reference implementations used by the tests. None of them
// share code with the library: they loop per event, per output and per tap,
// and do their rounding in exact integer arithmetic.

#include <cstdint>
#include <vector>

#include "evtrack/event_io.hpp"
#include "evtrack/tensor.hpp"

namespace oracle {

// floor(n / d) for d > 0, without relying on shift or truncation semantics.
int64_t floor_div(int64_t n, int64_t d);

// n / 2^s rounded half to even, from the exact quotient and remainder.
int64_t round_half_even_pow2(int64_t n, int s);

int64_t clamp(int64_t v, int64_t lo, int64_t hi);

// Hard activations straight from their piecewise rational definitions
// (x = raw / 2048), with the division by 8 or 2 taken as floor.
int16_t hardsigmoid(int16_t raw);
int16_t hardtanh(int16_t raw);

// w (Q1.7) * a (Q5.11) -> Q5.11 with convergent rounding and saturation.
int16_t product_to_activation(int8_t w, int16_t a);

// Per-event accumulation. Frame k covers (t0 + k*dt, t0 + (k+1)*dt].
std::vector<evtrack::EventFrame> aggregate_time(const std::vector<evtrack::Event>& ev, uint64_t dt, int64_t t0,
                                                evtrack::SensorGeometry g);
std::vector<evtrack::EventFrame> aggregate_count(const std::vector<evtrack::Event>& ev, uint64_t n,
                                                 evtrack::SensorGeometry g);
evtrack::EventFrame downsample(const evtrack::EventFrame& f, int factor);

// Naive convolution with an int64 accumulator checked against saturation
// bounds only at the points the datapath saturates.
evtrack::TensorQ conv_fixed(const evtrack::TensorQ& in, int out_c, int k, int stride, int pad, bool depthwise,
                            const std::vector<int32_t>& w, const std::vector<int32_t>& b, int act);

// Random event stream with non-decreasing timestamps.
std::vector<evtrack::Event> random_stream(uint64_t seed, size_t n, evtrack::SensorGeometry g, uint64_t max_gap_us);

}  // namespace oracle
