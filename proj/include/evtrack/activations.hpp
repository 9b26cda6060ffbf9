#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace evtrack {

enum class ActivationKind { bypass, relu, hardsigmoid, hardtanh };

std::string_view to_string(ActivationKind k);
ActivationKind activation_from_string(std::string_view s);

// Raw Q5.11 in, raw Q5.11 out. Only compares, shifts and constant adds.
namespace act {

inline constexpr int16_t kOne = 2048;

constexpr int16_t relu(int16_t x) { return x > 0 ? x : int16_t{0}; }

constexpr int16_t hardsigmoid(int16_t x) {
    if (x < -4 * kOne) return 0;
    if (x > 4 * kOne) return kOne;
    return static_cast<int16_t>((x >> 3) + kOne / 2);
}

constexpr int16_t hardtanh(int16_t x) {
    if (x < -2 * kOne) return -kOne;
    if (x > 2 * kOne) return kOne;
    return static_cast<int16_t>(x >> 1);
}

constexpr int16_t apply(ActivationKind k, int16_t x) {
    switch (k) {
        case ActivationKind::relu: return relu(x);
        case ActivationKind::hardsigmoid: return hardsigmoid(x);
        case ActivationKind::hardtanh: return hardtanh(x);
        case ActivationKind::bypass: break;
    }
    return x;
}

}  // namespace act

// Real-valued forms.
namespace ref {

double relu(double x);
double hardsigmoid(double x);
double hardtanh(double x);
double sigmoid(double x);
double tanh(double x);
double gelu(double x);  // erf form

double apply(ActivationKind k, double x);

struct ApproxError {
    double max_abs = 0.0;
    double at = 0.0;
};

// Max |hard - smooth| over a uniform grid on [lo, hi].
ApproxError hardsigmoid_vs_sigmoid(double lo, double hi, int points);
ApproxError hardtanh_vs_tanh(double lo, double hi, int points);
ApproxError relu_vs_gelu(double lo, double hi, int points);

}  // namespace ref

}  // namespace evtrack
