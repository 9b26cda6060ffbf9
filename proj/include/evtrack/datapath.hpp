#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evtrack/accel_model.hpp"
#include "evtrack/network.hpp"

namespace evtrack {

// Functional model of the PE array: every stage runs tile by tile in the
// dataflow the schedule assigns, using the fixed-point primitives.
class TileDatapath {
public:
    TileDatapath(ModelConfig cfg, WeightSet weights, HardwareConfig hw = {});

    void reset();
    // Stage outputs in execution order.
    std::vector<std::pair<std::string, TensorQ>> step(const TensorQ& input);

    int64_t gated_macs() const { return gated_; }

private:
    TensorQ run_conv(const LayerSchedule& s, const TensorQ& in, const std::string& wname, const std::string& bname);
    TensorQ run_fc(const LayerSchedule& s, const TensorQ& in, const std::string& wname, const std::string& bname);
    const int32_t* w(const std::string& name) const;

    ModelConfig cfg_;
    WeightSet weights_;
    HardwareConfig hw_;
    std::vector<LayerSchedule> schedule_;
    std::map<std::string, TensorQ> state_;
    int64_t gated_ = 0;
};

struct DatapathMismatch {
    int frame = 0;
    std::string stage;
    int64_t index = 0;
    int expected = 0;
    int got = 0;
};

struct DatapathVerdict {
    bool equivalent = true;
    int frames = 0;
    int64_t stages_compared = 0;
    int64_t elements_compared = 0;
    std::optional<DatapathMismatch> first_mismatch;
    std::vector<std::pair<int16_t, int16_t>> outputs;  // raw head outputs per frame
};

DatapathVerdict verify_datapath(const ModelConfig& cfg, const WeightSet& weights, const std::vector<EventFrame>& frames,
                                const HardwareConfig& hw = {});

}  // namespace evtrack
