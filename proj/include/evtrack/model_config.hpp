#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtrack/activations.hpp"
#include "evtrack/fixed_point.hpp"

namespace evtrack {

enum class LayerKind { conv2d, gmlp, convjanet, global_max_pool, fully_connected };

std::string_view to_string(LayerKind k);
LayerKind layer_kind_from_string(std::string_view s);

// For gmlp, in == out == C and the hidden expansion is 2C.
// For convjanet, in is the input channel count, out is the hidden/cell
// channel count and kernel is the depthwise kernel of both gate paths.
struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::conv2d;
    int kernel_h = 1;
    int kernel_w = 1;
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    int padding = 0;
    ActivationKind activation = ActivationKind::bypass;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Shape3 {
    int c = 0;
    int h = 0;
    int w = 0;
    int64_t numel() const { return int64_t{c} * h * w; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct ModelConfig {
    std::string name = "evtrack-net";
    Shape3 input{3, 60, 80};
    // Q5.11 head output times this gives downsampled-frame pixel coordinates.
    double output_scale = 8.0;
    // Multiply predictions by the downsample factor to get sensor pixels.
    bool sensor_coordinates = false;
    QFormat weight_fmt = kWeightFmt;
    QFormat act_fmt = kActivationFmt;
    QFormat acc_fmt = kAccumFmt;
    std::vector<LayerSpec> layers;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BackboneDims {
    int c1 = 20;
    int c2 = 32;
    int c3 = 20;
    int hidden = 16;
    int stem_stride = 4;
    bool gmlp_first = true;
};

ModelConfig make_model_config(const BackboneDims& d, Shape3 input = {3, 60, 80});
ModelConfig default_model_config();

// Throws ConfigError on any inconsistency.
void validate(const ModelConfig& cfg);

struct LayerShapes {
    Shape3 in;
    Shape3 out;
};
std::vector<LayerShapes> layer_shapes(const ModelConfig& cfg);

enum class TensorRole { weight, bias };
std::string_view to_string(TensorRole r);

struct TensorSpec {
    std::string name;
    std::string layer;
    TensorRole role = TensorRole::weight;
    std::vector<int> shape;
    int64_t numel() const;
};

std::vector<TensorSpec> tensor_manifest(const ModelConfig& cfg);

struct LayerCost {
    std::string layer;
    LayerKind kind = LayerKind::conv2d;
    int64_t params = 0;
    int64_t macs = 0;
    int64_t elementwise_ops = 0;
};

std::vector<LayerCost> layer_costs(const ModelConfig& cfg);
int64_t total_params(const ModelConfig& cfg);
int64_t total_macs(const ModelConfig& cfg);
inline int64_t total_flops(const ModelConfig& cfg) { return 2 * total_macs(cfg); }

int conv_out_dim(int in, int k, int stride, int pad);

std::string to_json_string(const ModelConfig& cfg, int indent = -1);
ModelConfig model_config_from_json_string(const std::string& text);

}  // namespace evtrack
