#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evtrack/network.hpp"

namespace evtrack {

struct TensorQuantStats {
    std::string tensor;
    std::string layer;
    TensorRole role = TensorRole::weight;
    int64_t count = 0;
    double max_abs_error = 0.0;
    double mean_abs_error = 0.0;
    int64_t saturated = 0;
};

struct LayerQuantStats {
    std::string layer;
    int64_t weight_count = 0;
    int64_t bias_count = 0;
    double max_abs_error = 0.0;   // weights only
    double mean_abs_error = 0.0;  // weights only
    int64_t saturated = 0;
};

struct Footprint {
    int64_t weight_bytes_fp32 = 0;
    int64_t weight_bytes_fixed = 0;
    int64_t activation_bytes_fp32 = 0;
    int64_t activation_bytes_fixed = 0;
    int64_t bias_bytes = 0;  // 32-bit in both cases
    double weight_ratio() const { return weight_bytes_fp32 ? double(weight_bytes_fixed) / double(weight_bytes_fp32) : 0.0; }
    double activation_ratio() const {
        return activation_bytes_fp32 ? double(activation_bytes_fixed) / double(activation_bytes_fp32) : 0.0;
    }
};

struct QuantReport {
    std::vector<TensorQuantStats> tensors;
    std::vector<LayerQuantStats> layers;
    Footprint footprint;
    int64_t total_weights = 0;  // weights + biases, equals the parameter counter
    int64_t total_saturated = 0;
};

struct QuantizedModel {
    WeightSet weights;  // raw filled, float values kept
    QuantReport report;
};

QuantizedModel quantize_model(const WeightSet& float_weights, const ModelConfig& cfg);
Footprint compute_footprint(const ModelConfig& cfg);

struct RangeEntry {
    std::string tensor;  // stage name, ".pre" suffix for pre-activation values
    double min = 0.0;
    double max = 0.0;
    bool overflow_risk = false;  // outside [-16, 16)
    // Count of |v| in [2^(k-1), 2^k) for k = -11..5; bucket 0 holds zeros
    // and values below 2^-11, the last bucket holds |v| >= 16.
    std::vector<int64_t> histogram;
};

struct RangeReport {
    std::vector<RangeEntry> entries;
    int frames = 0;
    bool any_overflow() const;
    const RangeEntry* find(const std::string& tensor) const;
};

inline constexpr int kHistogramBuckets = 18;

// Runs the reference (real) forward pass over the sample and records ranges.
RangeReport calibrate_ranges(const ModelConfig& cfg, const WeightSet& weights, const std::vector<EventFrame>& frames);

}  // namespace evtrack
