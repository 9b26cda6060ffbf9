#include "evtrack/activations.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace evtrack {

std::string_view to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::bypass: return "bypass";
        case ActivationKind::relu: return "relu";
        case ActivationKind::hardsigmoid: return "hardsigmoid";
        case ActivationKind::hardtanh: return "hardtanh";
    }
    return "bypass";
}

ActivationKind activation_from_string(std::string_view s) {
    if (s == "bypass" || s == "none") return ActivationKind::bypass;
    if (s == "relu") return ActivationKind::relu;
    if (s == "hardsigmoid") return ActivationKind::hardsigmoid;
    if (s == "hardtanh") return ActivationKind::hardtanh;
    throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

namespace ref {

double relu(double x) { return x > 0.0 ? x : 0.0; }

double hardsigmoid(double x) {
    if (x < -4.0) return 0.0;
    if (x > 4.0) return 1.0;
    return x / 8.0 + 0.5;
}

double hardtanh(double x) {
    if (x < -2.0) return -1.0;
    if (x > 2.0) return 1.0;
    return x / 2.0;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double tanh(double x) { return std::tanh(x); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double apply(ActivationKind k, double x) {
    switch (k) {
        case ActivationKind::relu: return relu(x);
        case ActivationKind::hardsigmoid: return hardsigmoid(x);
        case ActivationKind::hardtanh: return hardtanh(x);
        case ActivationKind::bypass: break;
    }
    return x;
}

namespace {

template <class F, class G>
ApproxError grid_max(F f, G g, double lo, double hi, int points) {
    ApproxError e;
    if (points < 2) throw std::invalid_argument("grid needs at least 2 points");
    for (int i = 0; i < points; ++i) {
        const double x = lo + (hi - lo) * i / (points - 1);
        const double d = std::abs(f(x) - g(x));
        if (d > e.max_abs) {
            e.max_abs = d;
            e.at = x;
        }
    }
    return e;
}

}  // namespace

ApproxError hardsigmoid_vs_sigmoid(double lo, double hi, int points) {
    return grid_max(hardsigmoid, sigmoid, lo, hi, points);
}

ApproxError hardtanh_vs_tanh(double lo, double hi, int points) {
    return grid_max(hardtanh, [](double x) { return std::tanh(x); }, lo, hi, points);
}

ApproxError relu_vs_gelu(double lo, double hi, int points) {
    return grid_max(relu, gelu, lo, hi, points);
}

}  // namespace ref
}  // namespace evtrack
