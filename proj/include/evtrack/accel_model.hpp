#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtrack/energy.hpp"
#include "evtrack/model_config.hpp"
#include "evtrack/network.hpp"

namespace evtrack {

struct PeArrayConfig {
    int rows = 8;
    int cols = 8;
    int weight_regs_per_pe = 9;  // 8-bit each
    int accumulator_bits = 32;
    int mac_latency = 1;
    int mode_switch_cycles = 2;
    int activation_cycles = 2;
    double clock_hz = 4.0e8;

    int pes() const { return rows * cols; }
};

struct MemoryConfig {
    int64_t weight_sram = 65536;
    int64_t act_sram = 32768;
    int64_t bias_sram = 4096;
    int concurrent_ports = 3;
    int read_latency = 8;
    int fifo_depth = 16;
    double aggregate_bw = 3.2e9;  // bytes per second
    int64_t tile_buffer = 4096;

    double bytes_per_cycle(double clock_hz) const { return aggregate_bw / clock_hz; }
};

// Knobs of the analytic timing model. Defaults reproduce the 64/392-cycle
// tile figures; the rest are modelling assumptions.
struct TimingModel {
    int tile_cycles_3x3 = 64;
    int tile_cycles_7x7 = 392;
    // Other k x k kernels: cycles_per_tap * k*k (one input channel per tap group).
    int cycles_per_tap = 8;
    // Prefetch is issued this many cycles before a pass ends; 0 = FIFO depth.
    int prefetch_lead = 0;
    // Bytes of the next pass that must land before it can start: the first
    // weight residency (k*k bytes). Later residencies stream behind it.
    bool head_is_first_residency = true;
    // Pipeline fill at every stage start; negative = SRAM read latency.
    int stage_fill = -1;
    int rs_pipeline_cycles = 3;
};

struct HardwareConfig {
    PeArrayConfig pe;
    MemoryConfig mem;
    TimingModel timing;
};

enum class DataflowMode { none, weight_stationary, output_stationary, row_stationary };
std::string_view to_string(DataflowMode m);
DataflowMode dataflow_from_string(std::string_view s);

enum class StageKind { conv, depthwise, elementwise, pool, fully_connected };
std::string_view to_string(StageKind k);

class SramOverflowError : public std::runtime_error {
public:
    SramOverflowError(std::string layer, std::string bank, int64_t over, const std::string& msg)
        : std::runtime_error(msg), layer_(std::move(layer)), bank_(std::move(bank)), over_(over) {}
    const std::string& layer() const { return layer_; }
    const std::string& bank() const { return bank_; }
    int64_t overflow_bytes() const { return over_; }

private:
    std::string layer_;
    std::string bank_;
    int64_t over_;
};

struct LayerSchedule {
    std::string stage;
    std::string layer;
    StageKind kind = StageKind::conv;
    DataflowMode mode = DataflowMode::none;
    int kh = 1;
    int kw = 1;
    int stride = 1;
    int pad = 0;
    Shape3 in;
    Shape3 out;
    int elementwise_ops_per_output = 0;
    ActivationKind activation = ActivationKind::bypass;

    // Tiling.
    int spatial_tiles = 0;    // ceil(H/8) * ceil(W/8) over the output
    int out_units = 0;        // output channels, or channel groups for depthwise
    int channel_groups = 0;   // ceil(C_in/8) per output unit
    int64_t passes = 0;       // spatial_tiles * out_units * channel_groups
    int tile_cycles = 0;
    int prefetch_issue_cycle = 0;
    int weight_residency_cycles = 0;
    int64_t weight_residencies = 0;

    // Timing.
    int64_t mode_switch_cycles = 0;
    int64_t fill_cycles = 0;
    int64_t compute_cycles = 0;
    int64_t stall_cycles = 0;
    int64_t drain_cycles = 0;
    int64_t total_cycles = 0;
    int64_t fetch_cycles = 0;
    int64_t fetch_cycles_hidden = 0;

    // Traffic, bytes.
    int64_t weight_read_bytes = 0;
    int64_t act_read_bytes = 0;
    int64_t bias_read_bytes = 0;
    int64_t psum_read_bytes = 0;
    int64_t psum_write_bytes = 0;
    int64_t act_write_bytes = 0;
    int64_t psum_writebacks = 0;
    int64_t register_accesses = 0;

    // MAC accounting.
    int64_t slot_macs = 0;
    int64_t real_macs = 0;
    int64_t padding_macs = 0;
    int64_t zero_skipped_macs = 0;
    int64_t executed_macs = 0;

    int64_t working_set_bytes = 0;

    double utilization() const { return total_cycles ? double(compute_cycles) / double(total_cycles) : 0.0; }
    double prefetch_overlap() const { return fetch_cycles ? double(fetch_cycles_hidden) / double(fetch_cycles) : 1.0; }
    int64_t skipped_macs() const { return padding_macs + zero_skipped_macs; }
    ActivityCounts activity() const;
};

enum class FsmState {
    idle,
    load_config,
    mode_switch,
    prefetch,
    compute_ws,
    compute_os,
    compute_rs,
    elementwise,
    activate,
    writeback,
    pool,
    done
};
inline constexpr int kFsmStateCount = 12;
std::string_view to_string(FsmState s);

struct FsmStep {
    FsmState state = FsmState::idle;
    std::string stage;
    int64_t cycles = 0;
};

struct ScheduleOptions {
    // Override the mandated dataflow of a layer (by layer name); for studies.
    std::map<std::string, DataflowMode> mode_override;
};

std::vector<LayerSchedule> build_schedule(const ModelConfig& cfg, const HardwareConfig& hw,
                                          const ScheduleOptions& opt = {});

struct SparsitySource {
    enum class Kind { injected, measured } kind = Kind::injected;
    double injected = 0.0;
    // Fixed-mode counters from the network; zero_operand_macs / frames.
    const CounterReport* measured = nullptr;

    static SparsitySource inject(double s) { return SparsitySource{Kind::injected, s, nullptr}; }
    static SparsitySource from(const CounterReport& c) { return SparsitySource{Kind::measured, 0.0, &c}; }
};

struct SimOptions {
    ScheduleOptions schedule;
    bool include_leakage = false;
};

struct LayerSummary {
    std::string layer;
    int64_t cycles = 0;
    int64_t compute_cycles = 0;
    double utilization = 0.0;
};

struct SimReport {
    HardwareConfig hw;
    std::vector<LayerSchedule> stages;
    std::vector<FsmStep> fsm_trace;
    int64_t total_cycles = 0;
    double latency_s = 0.0;
    double latency_ms = 0.0;
    double fps_single_frame = 0.0;     // 1 / latency
    double fps_layer_pipelined = 0.0;  // clock / slowest layer
    double utilization = 0.0;          // issue-slot occupancy
    double mac_efficiency = 0.0;       // real MACs / (PEs * cycles)
    double prefetch_overlap = 0.0;
    double sparsity = 0.0;             // zero-skipped / real MACs
    ActivityCounts activity;
    EnergyBreakdown energy;            // joules per frame
    double dynamic_power_w = 0.0;
    bool leakage_included = false;

    std::vector<LayerSummary> layers() const;
    const LayerSchedule* stage(const std::string& name) const;
};

SimReport simulate(const ModelConfig& cfg, const HardwareConfig& hw, const SparsitySource& sparsity,
                   const EnergyCoefficients& coeffs, const SimOptions& opt = {});

// Partial-sum writebacks of one layer under the given dataflow.
int64_t layer_psum_writebacks(const ModelConfig& cfg, const HardwareConfig& hw, const std::string& layer,
                              DataflowMode mode);

int64_t activation_working_set(const ModelConfig& cfg, size_t layer_index);

}  // namespace evtrack
