#include "evtrack/accel_model.hpp"

#include <algorithm>
#include <cmath>

namespace evtrack {

std::string_view to_string(DataflowMode m) {
    switch (m) {
        case DataflowMode::none: return "none";
        case DataflowMode::weight_stationary: return "weight_stationary";
        case DataflowMode::output_stationary: return "output_stationary";
        case DataflowMode::row_stationary: return "row_stationary";
    }
    return "none";
}

DataflowMode dataflow_from_string(std::string_view s) {
    if (s == "weight_stationary" || s == "ws") return DataflowMode::weight_stationary;
    if (s == "output_stationary" || s == "os") return DataflowMode::output_stationary;
    if (s == "row_stationary" || s == "rs") return DataflowMode::row_stationary;
    if (s == "none") return DataflowMode::none;
    throw std::invalid_argument("unknown dataflow '" + std::string(s) + "'");
}

std::string_view to_string(StageKind k) {
    switch (k) {
        case StageKind::conv: return "conv";
        case StageKind::depthwise: return "depthwise";
        case StageKind::elementwise: return "elementwise";
        case StageKind::pool: return "pool";
        case StageKind::fully_connected: return "fully_connected";
    }
    return "conv";
}

std::string_view to_string(FsmState s) {
    switch (s) {
        case FsmState::idle: return "IDLE";
        case FsmState::load_config: return "LOAD_CONFIG";
        case FsmState::mode_switch: return "MODE_SWITCH";
        case FsmState::prefetch: return "PREFETCH";
        case FsmState::compute_ws: return "COMPUTE_WS";
        case FsmState::compute_os: return "COMPUTE_OS";
        case FsmState::compute_rs: return "COMPUTE_RS";
        case FsmState::elementwise: return "ELEMENTWISE";
        case FsmState::activate: return "ACTIVATE";
        case FsmState::writeback: return "WRITEBACK";
        case FsmState::pool: return "POOL";
        case FsmState::done: return "DONE";
    }
    return "IDLE";
}

ActivityCounts LayerSchedule::activity() const {
    ActivityCounts a;
    a.mac = executed_macs;
    a.sram_read = weight_read_bytes + act_read_bytes + bias_read_bytes + psum_read_bytes;
    a.sram_write = psum_write_bytes + act_write_bytes;
    a.reg = register_accesses;
    a.control = total_cycles;
    return a;
}

namespace {

int64_t cdiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

constexpr int kTile = 8;  // spatial tile edge and channel group size
constexpr int kActBytes = 2;
constexpr int kPsumBytes = 4;

DataflowMode mandated_mode(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d:
        case LayerKind::gmlp: return DataflowMode::weight_stationary;
        case LayerKind::convjanet: return DataflowMode::output_stationary;
        case LayerKind::fully_connected: return DataflowMode::row_stationary;
        case LayerKind::global_max_pool: break;
    }
    return DataflowMode::none;
}

int tile_cycles_for(const TimingModel& t, int kh, int kw) {
    if (kh == 3 && kw == 3) return t.tile_cycles_3x3;
    if (kh == 7 && kw == 7) return t.tile_cycles_7x7;
    return t.cycles_per_tap * kh * kw;
}

std::vector<LayerSchedule> stage_list(const ModelConfig& cfg, const ScheduleOptions& opt) {
    const auto shapes = layer_shapes(cfg);
    std::vector<LayerSchedule> out;
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        const auto& l = cfg.layers[i];
        DataflowMode mode = mandated_mode(l.kind);
        if (auto it = opt.mode_override.find(l.name); it != opt.mode_override.end() && mode != DataflowMode::none) {
            mode = it->second;
        }
        const Shape3 in = shapes[i].in;
        const Shape3 o = shapes[i].out;
        auto base = [&](std::string stage, StageKind kind, Shape3 sin, Shape3 sout) {
            LayerSchedule s;
            s.stage = std::move(stage);
            s.layer = l.name;
            s.kind = kind;
            s.mode = mode;
            s.in = sin;
            s.out = sout;
            return s;
        };
        switch (l.kind) {
            case LayerKind::conv2d: {
                auto s = base(l.name, StageKind::conv, in, o);
                s.kh = l.kernel_h;
                s.kw = l.kernel_w;
                s.stride = l.stride;
                s.pad = l.padding;
                s.activation = l.activation;
                out.push_back(s);
                break;
            }
            case LayerKind::gmlp: {
                const int c = l.in_channels;
                out.push_back(base(l.name + ".expand", StageKind::conv, in, {2 * c, in.h, in.w}));
                auto g = base(l.name + ".gate", StageKind::elementwise, {2 * c, in.h, in.w}, {c, in.h, in.w});
                g.elementwise_ops_per_output = 1;
                out.push_back(g);
                out.push_back(base(l.name + ".project", StageKind::conv, {c, in.h, in.w}, o));
                break;
            }
            case LayerKind::convjanet: {
                const int cc = l.in_channels + l.out_channels;
                const Shape3 cat{cc, in.h, in.w};
                for (const char* gate : {"forget", "candidate"}) {
                    auto dw = base(l.name + "." + gate + ".dw", StageKind::depthwise, cat, cat);
                    dw.kh = l.kernel_h;
                    dw.kw = l.kernel_w;
                    dw.pad = l.padding;
                    out.push_back(dw);
                    auto pw = base(l.name + "." + gate + ".pw", StageKind::conv, cat, o);
                    pw.activation = std::string(gate) == "forget" ? ActivationKind::hardsigmoid : ActivationKind::hardtanh;
                    out.push_back(pw);
                }
                auto cell = base(l.name + ".cell", StageKind::elementwise, {3 * o.c, o.h, o.w}, o);
                cell.elementwise_ops_per_output = 2;
                out.push_back(cell);
                break;
            }
            case LayerKind::global_max_pool:
                out.push_back(base(l.name, StageKind::pool, in, o));
                break;
            case LayerKind::fully_connected:
                out.push_back(base(l.name, StageKind::fully_connected, in, o));
                break;
        }
    }
    return out;
}

void check_capacity(const ModelConfig& cfg, const HardwareConfig& hw) {
    int64_t wbytes = 0;
    int64_t bbytes = 0;
    for (const auto& t : tensor_manifest(cfg)) {
        if (t.role == TensorRole::weight) wbytes += t.numel() * cfg.weight_fmt.total_bits() / 8;
        else bbytes += t.numel() * cfg.acc_fmt.total_bits() / 8;
    }
    if (wbytes > hw.mem.weight_sram) {
        throw SramOverflowError("*", "weight", wbytes - hw.mem.weight_sram,
                                "weights need " + std::to_string(wbytes) + " B, weight SRAM holds " +
                                    std::to_string(hw.mem.weight_sram) + " B");
    }
    if (bbytes > hw.mem.bias_sram) {
        throw SramOverflowError("*", "bias", bbytes - hw.mem.bias_sram,
                                "biases need " + std::to_string(bbytes) + " B, bias SRAM holds " +
                                    std::to_string(hw.mem.bias_sram) + " B");
    }
    const int64_t tile = 2LL * kTile * kTile * kTile * (hw.pe.accumulator_bits / 8);
    if (tile > hw.mem.tile_buffer) {
        throw SramOverflowError("*", "tile_buffer", tile - hw.mem.tile_buffer, "double-buffered tile does not fit");
    }
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        const int64_t ws = activation_working_set(cfg, i);
        if (ws > hw.mem.act_sram) {
            throw SramOverflowError(cfg.layers[i].name, "activation", ws - hw.mem.act_sram,
                                    "layer '" + cfg.layers[i].name + "' needs " + std::to_string(ws) +
                                        " B of activation SRAM, " + std::to_string(ws - hw.mem.act_sram) + " B over");
        }
    }
}

void schedule_conv(LayerSchedule& s, const HardwareConfig& hw) {
    const auto& t = hw.timing;
    const bool dw = s.kind == StageKind::depthwise;
    const int k2 = s.kh * s.kw;
    const int ci = s.in.c;
    s.spatial_tiles = static_cast<int>(cdiv(s.out.h, kTile) * cdiv(s.out.w, kTile));
    s.out_units = dw ? static_cast<int>(cdiv(s.out.c, kTile)) : s.out.c;
    s.channel_groups = dw ? 1 : static_cast<int>(cdiv(ci, kTile));
    s.passes = int64_t{s.spatial_tiles} * s.out_units * s.channel_groups;
    s.tile_cycles = tile_cycles_for(t, s.kh, s.kw);
    const int lead = t.prefetch_lead > 0 ? t.prefetch_lead : hw.mem.fifo_depth;
    s.prefetch_issue_cycle = std::max(0, s.tile_cycles - lead);
    s.weight_residency_cycles = k2;

    const double bw = hw.mem.bytes_per_cycle(hw.pe.clock_hz);
    const int head = t.head_is_first_residency ? k2 : kTile * k2;
    const int64_t fetch = hw.mem.read_latency + static_cast<int64_t>(std::ceil(head / bw));
    const int64_t window = std::min(lead, s.tile_cycles);
    const int patch_h = std::min((kTile - 1) * s.stride + s.kh, s.in.h + 2 * s.pad);
    const int patch_w = std::min((kTile - 1) * s.stride + s.kw, s.in.w + 2 * s.pad);
    const bool ws = s.mode == DataflowMode::weight_stationary;
    const int drain = hw.pe.activation_cycles;

    bool first = true;
    int64_t final_outputs = 0;
    for (int b = 0; b < s.spatial_tiles; ++b) {
        for (int u = 0; u < s.out_units; ++u) {
            const int unit_ch = dw ? std::min(kTile, s.out.c - u * kTile) : 1;
            s.bias_read_bytes += int64_t{4} * unit_ch;
            final_outputs += int64_t{kTile} * kTile * unit_ch;
            for (int g = 0; g < s.channel_groups; ++g) {
                const int n_ic = dw ? unit_ch : std::min(kTile, ci - g * kTile);
                const bool last_group = g + 1 == s.channel_groups;
                if (first) {
                    s.fill_cycles += fetch;
                    s.fetch_cycles += fetch;
                    first = false;
                } else {
                    const int64_t stall = std::max<int64_t>(0, fetch - window);
                    s.stall_cycles += stall;
                    s.fetch_cycles += fetch;
                    s.fetch_cycles_hidden += fetch - stall;
                }
                s.compute_cycles += s.tile_cycles;
                s.weight_residencies += n_ic;
                const int64_t wbytes = int64_t{n_ic} * k2;
                const int64_t abytes = int64_t{n_ic} * patch_h * patch_w * kActBytes;
                s.weight_read_bytes += wbytes;
                s.act_read_bytes += abytes;
                s.register_accesses += wbytes + abytes / kActBytes;
                if (ws || dw) {
                    // WS: the accumulator leaves the PE after every input channel.
                    s.psum_writebacks += int64_t{kTile} * kTile * n_ic;
                } else {
                    // OS: the sum stays in the accumulator across the channels
                    // of a group; the group result merges into the tile buffer.
                    s.psum_writebacks += int64_t{kTile} * kTile;
                }
                if (ws || last_group) s.drain_cycles += drain;
                s.slot_macs += int64_t{kTile} * kTile * kTile * k2;
            }
        }
    }
    s.psum_write_bytes = s.psum_writebacks * kPsumBytes;
    s.psum_read_bytes = std::max<int64_t>(0, s.psum_writebacks - final_outputs) * kPsumBytes;
    s.act_write_bytes = s.out.numel() * kActBytes;
    const int64_t per_out = dw ? k2 : int64_t{ci} * k2;
    s.real_macs = s.out.numel() * per_out;
    s.padding_macs = s.slot_macs - s.real_macs;
}

void schedule_elementwise(LayerSchedule& s, const HardwareConfig& hw) {
    const int64_t n = s.out.numel();
    const int64_t pes = hw.pe.pes();
    s.passes = cdiv(n, pes);
    s.compute_cycles = s.passes * s.elementwise_ops_per_output;
    s.slot_macs = s.compute_cycles * pes;
    s.real_macs = n * s.elementwise_ops_per_output;
    s.padding_macs = s.slot_macs - s.real_macs;
    const int inputs = s.elementwise_ops_per_output == 1 ? 2 : 3;
    s.act_read_bytes = n * inputs * kActBytes;
    s.act_write_bytes = n * kActBytes;
    s.register_accesses = n * inputs;
}

void schedule_pool(LayerSchedule& s, const HardwareConfig& hw) {
    const int64_t n = s.in.numel();
    s.passes = cdiv(n, hw.pe.pes());
    s.drain_cycles = s.passes;  // activation core compare tree, PEs idle
    s.act_read_bytes = n * kActBytes;
    s.act_write_bytes = s.out.numel() * kActBytes;
}

void schedule_fc(LayerSchedule& s, const HardwareConfig& hw) {
    const int in = s.in.c;
    const int out = s.out.c;
    s.passes = cdiv(out, kTile) * cdiv(in, kTile);
    s.compute_cycles = s.passes;
    s.drain_cycles = hw.timing.rs_pipeline_cycles;
    s.slot_macs = s.compute_cycles * hw.pe.pes();
    s.real_macs = int64_t{in} * out;
    s.padding_macs = s.slot_macs - s.real_macs;
    s.weight_read_bytes = int64_t{in} * out;
    s.bias_read_bytes = int64_t{4} * out;
    s.act_read_bytes = int64_t{in} * kActBytes;
    s.act_write_bytes = int64_t{out} * kActBytes;
    s.psum_writebacks = out;
    s.psum_write_bytes = out * kPsumBytes;
    s.register_accesses = s.weight_read_bytes + in;
}

}  // namespace

int64_t activation_working_set(const ModelConfig& cfg, size_t i) {
    const auto shapes = layer_shapes(cfg);
    const auto& l = cfg.layers.at(i);
    const int64_t in = shapes[i].in.numel() * kActBytes;
    const int64_t out = shapes[i].out.numel() * kActBytes;
    switch (l.kind) {
        case LayerKind::conv2d:
            // The first layer reads the frame straight from the event front end.
            return (i == 0 ? 0 : in) + out;
        case LayerKind::gmlp:
            // Expanded and gated tensors stream through the tile buffer in
            // 8-channel slices and are never resident.
            return in + out;
        case LayerKind::convjanet:
            // x, c_{t-1} and c_t; gate intermediates stay tile-local.
            return in + 2 * out;
        case LayerKind::global_max_pool:
        case LayerKind::fully_connected: return in + out;
    }
    return in + out;
}

std::vector<LayerSchedule> build_schedule(const ModelConfig& cfg, const HardwareConfig& hw, const ScheduleOptions& opt) {
    validate(cfg);
    check_capacity(cfg, hw);
    auto stages = stage_list(cfg, opt);
    const int64_t fill = hw.timing.stage_fill < 0 ? hw.mem.read_latency : hw.timing.stage_fill;
    DataflowMode prev = DataflowMode::none;
    for (auto& s : stages) {
        if (s.mode != DataflowMode::none) {
            if (prev != DataflowMode::none && prev != s.mode) s.mode_switch_cycles = hw.pe.mode_switch_cycles;
            prev = s.mode;
        }
        switch (s.kind) {
            case StageKind::conv:
            case StageKind::depthwise: schedule_conv(s, hw); break;
            case StageKind::elementwise: schedule_elementwise(s, hw); break;
            case StageKind::pool: schedule_pool(s, hw); break;
            case StageKind::fully_connected: schedule_fc(s, hw); break;
        }
        s.fill_cycles += fill;
        s.total_cycles = s.mode_switch_cycles + s.fill_cycles + s.compute_cycles + s.stall_cycles + s.drain_cycles;
    }
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        for (auto& s : stages)
            if (s.layer == cfg.layers[i].name) s.working_set_bytes = activation_working_set(cfg, i);
    }
    return stages;
}

std::vector<LayerSummary> SimReport::layers() const {
    std::vector<LayerSummary> out;
    for (const auto& s : stages) {
        if (out.empty() || out.back().layer != s.layer) out.push_back(LayerSummary{s.layer});
        out.back().cycles += s.total_cycles;
        out.back().compute_cycles += s.compute_cycles;
    }
    for (auto& l : out) l.utilization = l.cycles ? double(l.compute_cycles) / double(l.cycles) : 0.0;
    return out;
}

const LayerSchedule* SimReport::stage(const std::string& name) const {
    for (const auto& s : stages)
        if (s.stage == name) return &s;
    return nullptr;
}

SimReport simulate(const ModelConfig& cfg, const HardwareConfig& hw, const SparsitySource& sp,
                   const EnergyCoefficients& coeffs, const SimOptions& opt) {
    if (sp.kind == SparsitySource::Kind::injected && !(sp.injected >= 0.0 && sp.injected <= 1.0)) {
        throw std::invalid_argument("injected sparsity must lie in [0, 1]");
    }
    if (sp.kind == SparsitySource::Kind::measured && (!sp.measured || sp.measured->frames <= 0)) {
        throw std::invalid_argument("measured sparsity needs counters from at least one fixed-mode frame");
    }
    SimReport r;
    r.hw = hw;
    r.stages = build_schedule(cfg, hw, opt.schedule);

    int64_t compute = 0;
    int64_t real = 0;
    int64_t skipped = 0;
    int64_t fetch = 0;
    int64_t hidden = 0;
    int64_t pe_real = 0;
    r.fsm_trace.push_back(FsmStep{FsmState::idle, "", 0});
    for (auto& s : r.stages) {
        const bool skippable = s.kind == StageKind::conv || s.kind == StageKind::depthwise ||
                               s.kind == StageKind::fully_connected;
        if (skippable) {
            if (sp.kind == SparsitySource::Kind::injected) {
                s.zero_skipped_macs = std::llround(sp.injected * static_cast<double>(s.real_macs));
            } else if (const auto* c = sp.measured->find(s.stage)) {
                const double nonzero = double(c->macs - c->zero_operand_macs) / double(sp.measured->frames);
                s.zero_skipped_macs = s.real_macs - std::llround(nonzero);
            }
            s.zero_skipped_macs = std::clamp<int64_t>(s.zero_skipped_macs, 0, s.real_macs);
            pe_real += s.real_macs;
            skipped += s.zero_skipped_macs;
        }
        s.executed_macs = s.real_macs - s.zero_skipped_macs;

        r.total_cycles += s.total_cycles;
        compute += s.compute_cycles;
        real += s.real_macs;
        fetch += s.fetch_cycles;
        hidden += s.fetch_cycles_hidden;
        r.activity += s.activity();

        r.fsm_trace.push_back(FsmStep{FsmState::load_config, s.stage, 0});
        if (s.mode_switch_cycles) r.fsm_trace.push_back(FsmStep{FsmState::mode_switch, s.stage, s.mode_switch_cycles});
        r.fsm_trace.push_back(FsmStep{FsmState::prefetch, s.stage, s.fill_cycles});
        FsmState cs = FsmState::compute_ws;
        if (s.kind == StageKind::elementwise) cs = FsmState::elementwise;
        else if (s.kind == StageKind::pool) cs = FsmState::pool;
        else if (s.mode == DataflowMode::output_stationary) cs = FsmState::compute_os;
        else if (s.mode == DataflowMode::row_stationary) cs = FsmState::compute_rs;
        if (s.kind == StageKind::pool) {
            r.fsm_trace.push_back(FsmStep{cs, s.stage, s.drain_cycles});
        } else {
            r.fsm_trace.push_back(FsmStep{cs, s.stage, s.compute_cycles + s.stall_cycles});
            r.fsm_trace.push_back(FsmStep{FsmState::activate, s.stage, s.drain_cycles});
        }
        r.fsm_trace.push_back(FsmStep{FsmState::writeback, s.stage, 0});
    }
    r.fsm_trace.push_back(FsmStep{FsmState::done, "", 0});

    const double f = hw.pe.clock_hz;
    r.latency_s = static_cast<double>(r.total_cycles) / f;
    r.latency_ms = static_cast<double>(r.total_cycles) / f * 1000.0;
    r.fps_single_frame = r.latency_s > 0 ? 1.0 / r.latency_s : 0.0;
    int64_t slowest = 0;
    for (const auto& l : r.layers()) slowest = std::max(slowest, l.cycles);
    r.fps_layer_pipelined = slowest ? f / static_cast<double>(slowest) : 0.0;
    r.utilization = r.total_cycles ? double(compute) / double(r.total_cycles) : 0.0;
    r.mac_efficiency = r.total_cycles ? double(real) / (double(hw.pe.pes()) * double(r.total_cycles)) : 0.0;
    r.prefetch_overlap = fetch ? double(hidden) / double(fetch) : 1.0;
    r.sparsity = pe_real ? double(skipped) / double(pe_real) : 0.0;
    r.energy = estimate_energy(r.activity, coeffs);
    const double dynamic = r.energy.total();
    r.dynamic_power_w = r.latency_s > 0 ? dynamic / r.latency_s : 0.0;
    if (opt.include_leakage) {
        r.energy.leakage = coeffs.leakage_mw * 1e-3 * r.latency_s;
        r.leakage_included = true;
    }
    return r;
}

int64_t layer_psum_writebacks(const ModelConfig& cfg, const HardwareConfig& hw, const std::string& layer,
                              DataflowMode mode) {
    ScheduleOptions opt;
    opt.mode_override[layer] = mode;
    int64_t n = 0;
    for (const auto& s : build_schedule(cfg, hw, opt))
        if (s.layer == layer) n += s.psum_writebacks;
    return n;
}

}  // namespace evtrack
