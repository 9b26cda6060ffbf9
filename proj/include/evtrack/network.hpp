#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evtrack/event_io.hpp"
#include "evtrack/model_config.hpp"
#include "evtrack/tensor.hpp"

namespace evtrack {

// One named parameter tensor. raw holds fixed-point values: Q1.7 for
// weights, accumulator format for biases. real holds float reference values.
struct WeightTensor {
    TensorSpec spec;
    std::vector<int32_t> raw;
    std::vector<float> real;
    bool has_fixed() const { return !raw.empty() || spec.numel() == 0; }
    bool has_real() const { return !real.empty(); }
};

struct WeightSet {
    std::map<std::string, WeightTensor> tensors;

    const WeightTensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    // Throws std::runtime_error naming the first missing or mis-sized tensor.
    void check_complete(const ModelConfig& cfg, bool need_fixed, bool need_real) const;
    bool all_fixed() const;
    bool all_real() const;
};

struct WeightInit {
    enum class Kind { uniform, fan_in } kind = Kind::fan_in;
    double lo = -1.0;  // uniform range
    double hi = 1.0;
    double bias_scale = 0.1;  // biases ~ U(-bias_scale, bias_scale)
};

// Float-only weight set; pass through quantize_model for fixed values.
WeightSet random_float_weights(const ModelConfig& cfg, uint64_t seed, const WeightInit& init = {});

enum class Precision { real, fixed };
enum class GateMode { deployed, original };

struct StageTrace {
    std::string stage;
    bool pre_activation = false;
    const TensorQ* fixed = nullptr;
    const TensorR* real = nullptr;
};

struct ForwardOptions {
    Precision precision = Precision::fixed;
    GateMode gates = GateMode::deployed;
    std::function<void(const StageTrace&)> observer;
};

struct StageCounters {
    std::string stage;
    std::string layer;
    int64_t macs = 0;               // in-bounds multiply-accumulates
    int64_t zero_operand_macs = 0;  // of which the activation operand was zero
    int64_t outputs = 0;
    int64_t zero_outputs = 0;
    uint64_t saturations = 0;

    double operand_sparsity() const { return macs ? double(zero_operand_macs) / double(macs) : 0.0; }
    double output_sparsity() const { return outputs ? double(zero_outputs) / double(outputs) : 0.0; }
};

struct LayerCounterSummary {
    std::string layer;
    int64_t params = 0;
    int64_t macs = 0;
    int64_t zero_operand_macs = 0;
    double output_sparsity = 0.0;
    uint64_t saturations = 0;
};

struct CounterReport {
    int64_t frames = 0;
    int64_t params = 0;
    int64_t macs_per_frame = 0;
    std::deque<StageCounters> stages;  // accumulated over all frames

    const StageCounters* find(const std::string& stage) const;
    std::vector<LayerCounterSummary> layers(const ModelConfig& cfg) const;
    uint64_t saturations() const;
};

struct Prediction {
    double x = 0.0;
    double y = 0.0;
    int16_t raw_x = 0;  // fixed mode only
    int16_t raw_y = 0;
};

struct SequenceResult {
    std::vector<Prediction> predictions;
    CounterReport counters;
};

struct ConvGeom {
    int in_c = 0;
    int out_c = 0;
    int kh = 1;
    int kw = 1;
    int stride = 1;
    int pad = 0;
    bool depthwise = false;
    ActivationKind act = ActivationKind::bypass;
};

// Accumulation order per output: input channel, kernel row, kernel column,
// then bias, then truncation, then activation.
TensorQ conv2d_fixed(const TensorQ& in, const ConvGeom& g, const int32_t* w, const int32_t* b,
                     StageCounters* ctr = nullptr);
TensorR conv2d_real(const TensorR& in, const ConvGeom& g, const double* w, const double* b,
                    StageCounters* ctr = nullptr, TensorR* pre = nullptr);

class Network {
public:
    Network(ModelConfig cfg, WeightSet weights);

    const ModelConfig& config() const { return cfg_; }
    const WeightSet& weights() const { return weights_; }

    void reset();
    Prediction step(const EventFrame& frame, const ForwardOptions& opt);
    Prediction step_tensor(const TensorQ* in_q, const TensorR* in_r, const ForwardOptions& opt);
    SequenceResult forward_sequence(const std::vector<EventFrame>& frames, const ForwardOptions& opt);

    const CounterReport& counters() const { return counters_; }
    void clear_counters();

    static TensorQ frame_to_fixed(const EventFrame& f, SatCounter* sat = nullptr);
    static TensorR frame_to_real(const EventFrame& f);

    // Recurrent state of each convjanet layer, by layer name.
    const std::map<std::string, TensorQ>& fixed_state() const { return state_q_; }
    const std::map<std::string, TensorR>& real_state() const { return state_r_; }

private:
    StageCounters& ctr(const std::string& stage, const std::string& layer);
    const std::vector<double>& rw(const std::string& name) const;
    const int32_t* qw(const std::string& name) const;

    ModelConfig cfg_;
    WeightSet weights_;
    std::map<std::string, std::vector<double>> real_w_;
    std::map<std::string, TensorQ> state_q_;
    std::map<std::string, TensorR> state_r_;
    CounterReport counters_;
};

// Output-coordinate conversion shared with the simulator.
Prediction prediction_from_raw(const ModelConfig& cfg, int16_t rx, int16_t ry);
Prediction prediction_from_real(const ModelConfig& cfg, double x, double y);

}  // namespace evtrack
