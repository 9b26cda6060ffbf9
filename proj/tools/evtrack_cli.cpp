// evtrack command-line front end. Every subcommand prints a JSON report
// (stdout, or --report FILE) and exits non-zero iff the report carries an error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "evtrack/accel_model.hpp"
#include "evtrack/config_search.hpp"
#include "evtrack/datapath.hpp"
#include "evtrack/event_io.hpp"
#include "evtrack/model_io.hpp"
#include "evtrack/network.hpp"
#include "evtrack/quantizer.hpp"
#include "json.hpp"

using nlohmann::json;
using namespace evtrack;

namespace {

constexpr int kReportSchemaVersion = 1;

struct CliError : std::runtime_error {
    std::string code;
    CliError(std::string c, const std::string& m) : std::runtime_error(m), code(std::move(c)) {}
};

struct Report {
    json manifest = json::object();
    json results = json::object();
    json counters = json::object();
    std::optional<json> error;

    json to_json() const {
        json j;
        j["schema_version"] = kReportSchemaVersion;
        j["manifest"] = manifest;
        j["results"] = results;
        j["counters"] = counters;
        j["error"] = error ? *error : json(nullptr);
        return j;
    }
};

std::vector<EventFrame> load_frames(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError("io_error", "cannot open frames file '" + path + "'");
    try {
        return read_frames(in);
    } catch (const std::runtime_error& e) {
        throw CliError("format_error", e.what());
    }
}

LoadedModel load_model_or_throw(const std::string& path) {
    try {
        return load_model_file(path);
    } catch (const ModelIoError& e) {
        throw CliError("format_error", e.what());
    } catch (const std::runtime_error& e) {
        throw CliError("io_error", e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError("io_error", "cannot write '" + path + "'");
    out << text;
}

json counters_json(const CounterReport& c, const ModelConfig& cfg) {
    json layers = json::array();
    for (const auto& l : c.layers(cfg)) {
        layers.push_back({{"layer", l.layer},
                          {"params", l.params},
                          {"macs", l.macs},
                          {"zero_operand_macs", l.zero_operand_macs},
                          {"output_sparsity", l.output_sparsity},
                          {"saturations", l.saturations}});
    }
    int64_t macs = 0;
    int64_t zeros = 0;
    for (const auto& s : c.stages) {
        macs += s.macs;
        zeros += s.zero_operand_macs;
    }
    return {{"frames", c.frames},
            {"params", c.params},
            {"macs_per_frame", c.macs_per_frame},
            {"flops_per_frame", 2 * c.macs_per_frame},
            {"operand_sparsity", macs ? double(zeros) / double(macs) : 0.0},
            {"saturations", c.saturations()},
            {"layers", layers}};
}

std::map<int, std::pair<double, double>> read_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError("io_error", "cannot open ground-truth file '" + path + "'");
    std::map<int, std::pair<double, double>> gt;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
            throw CliError("parse_error", "ground truth line " + std::to_string(lineno) + " is not frame_idx,x,y");
        }
        try {
            gt[std::stoi(a)] = {std::stod(b), std::stod(c)};
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header row
            throw CliError("parse_error", "ground truth line " + std::to_string(lineno) + " is not numeric");
        }
    }
    return gt;
}

json schedule_json(const LayerSchedule& s) {
    return {{"stage", s.stage},
            {"layer", s.layer},
            {"kind", std::string(to_string(s.kind))},
            {"dataflow", std::string(to_string(s.mode))},
            {"kernel", {s.kh, s.kw}},
            {"spatial_tiles", s.spatial_tiles},
            {"out_units", s.out_units},
            {"channel_groups", s.channel_groups},
            {"passes", s.passes},
            {"tile_cycles", s.tile_cycles},
            {"prefetch_issue_cycle", s.prefetch_issue_cycle},
            {"weight_residency_cycles", s.weight_residency_cycles},
            {"cycles",
             {{"total", s.total_cycles},
              {"mode_switch", s.mode_switch_cycles},
              {"fill", s.fill_cycles},
              {"compute", s.compute_cycles},
              {"stall", s.stall_cycles},
              {"drain", s.drain_cycles}}},
            {"utilization", s.utilization()},
            {"prefetch_overlap", s.prefetch_overlap()},
            {"sram_bytes",
             {{"weight_read", s.weight_read_bytes},
              {"act_read", s.act_read_bytes},
              {"bias_read", s.bias_read_bytes},
              {"psum_read", s.psum_read_bytes},
              {"psum_write", s.psum_write_bytes},
              {"act_write", s.act_write_bytes}}},
            {"psum_writebacks", s.psum_writebacks},
            {"macs",
             {{"slots", s.slot_macs},
              {"real", s.real_macs},
              {"padding", s.padding_macs},
              {"zero_skipped", s.zero_skipped_macs},
              {"executed", s.executed_macs}}},
            {"working_set_bytes", s.working_set_bytes}};
}

json energy_json(const EnergyBreakdown& e) {
    return {{"mac_uj", e.mac * 1e6},
            {"sram_read_uj", e.sram_read * 1e6},
            {"sram_write_uj", e.sram_write * 1e6},
            {"register_uj", e.reg * 1e6},
            {"control_uj", e.control * 1e6},
            {"leakage_uj", e.leakage * 1e6},
            {"total_uj", e.total() * 1e6}};
}

SparsitySource parse_sparsity(const std::string& s, const CounterReport* measured) {
    if (s == "measured") {
        if (!measured) throw CliError("invalid_argument", "--sparsity measured needs a frames file");
        return SparsitySource::from(*measured);
    }
    if (s.rfind("inject=", 0) == 0) {
        try {
            const double v = std::stod(s.substr(7));
            if (!(v >= 0.0 && v <= 1.0)) throw std::out_of_range("sparsity");
            return SparsitySource::inject(v);
        } catch (const std::exception&) {
            throw CliError("invalid_argument", "injected sparsity must be a number in [0, 1]");
        }
    }
    throw CliError("invalid_argument", "--sparsity must be 'measured' or 'inject=S'");
}

EnergyCoefficients load_coeffs(const std::string& path) {
    try {
        return path.empty() ? load_default_coefficients() : load_coefficients(path);
    } catch (const EnergyError& e) {
        throw CliError("missing_coefficients", e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evtrack: event-based eye tracking pipeline and accelerator model"};
    app.require_subcommand(1);
    std::string report_path;
    app.add_option("--report", report_path, "Write the JSON report here instead of stdout");
    Report rep;

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "Turn an event stream into frames");
    std::string agg_in, agg_out, agg_mode = "time";
    uint64_t dt_us = kDefaultWindowUs, n_evt = kDefaultEventsPerFrame;
    int64_t t0 = -1;
    bool downsample_on = true;
    agg->add_option("events", agg_in, "Event file (CSV or JEVT0001 binary)")->required();
    agg->add_option("-o,--output", agg_out, "Frame dump output path")->required();
    agg->add_option("--mode", agg_mode, "time or count")->check(CLI::IsMember({"time", "count"}));
    agg->add_option("--dt-us", dt_us, "Window length in microseconds (time mode)")->check(CLI::PositiveNumber);
    agg->add_option("--n-evt", n_evt, "Events per frame (count mode)")->check(CLI::PositiveNumber);
    agg->add_option("--t0", t0, "Time origin; default is first timestamp - 1");
    agg->add_flag("--downsample,!--no-downsample", downsample_on, "8x box downsampling to 80x60 (default on)");

    // init-model
    auto* init = app.add_subcommand("init-model", "Write a model with seeded random weights");
    std::string init_out, init_cfg;
    uint64_t seed = 1;
    bool float_only = false;
    init->add_option("-o,--output", init_out)->required();
    init->add_option("--config", init_cfg, "Model config JSON; default config otherwise");
    init->add_option("--seed", seed);
    init->add_flag("--float-only", float_only, "Store float weights only (input for quantize)");

    // quantize
    auto* quant = app.add_subcommand("quantize", "Quantize a float model to Q1.7 / 32-bit biases");
    std::string q_in, q_out;
    quant->add_option("model", q_in)->required();
    quant->add_option("-o,--output", q_out)->required();

    // infer
    auto* inf = app.add_subcommand("infer", "Run the network over a frame dump");
    std::string i_model, i_frames, i_mode = "fixed", i_gates = "deployed", i_gt;
    bool i_compare = false;
    inf->add_option("model", i_model)->required();
    inf->add_option("frames", i_frames)->required();
    inf->add_option("--mode", i_mode)->check(CLI::IsMember({"reference", "fixed"}));
    inf->add_option("--gates", i_gates, "deployed (hard) or original (sigmoid/tanh/GELU, reference only)")
        ->check(CLI::IsMember({"deployed", "original"}));
    inf->add_option("--ground-truth", i_gt, "CSV frame_idx,x,y in downsampled pixels");
    inf->add_flag("--compare", i_compare, "Also run the other precision and report coordinate deltas");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Cycle/energy model of the accelerator");
    std::string s_model, s_frames, s_coeffs, s_sparsity = "inject=0.4";
    double clock_hz = 4.0e8;
    bool leakage = false, trace = false;
    sim->add_option("model", s_model, "Model file; default config if omitted");
    sim->add_option("frames", s_frames, "Frame dump (needed for --sparsity measured)");
    sim->add_option("--coefficients", s_coeffs, "Energy coefficient file");
    sim->add_option("--sparsity", s_sparsity, "measured or inject=S");
    sim->add_option("--clock-hz", clock_hz)->check(CLI::PositiveNumber);
    sim->add_flag("--include-leakage", leakage);
    sim->add_flag("--trace", trace, "Include the FSM state trace");

    // verify-datapath
    auto* ver = app.add_subcommand("verify-datapath", "Compare the tile datapath with the network bit for bit");
    std::string v_model, v_frames;
    ver->add_option("model", v_model)->required();
    ver->add_option("frames", v_frames)->required();

    // calibrate-ranges
    auto* cal = app.add_subcommand("calibrate-ranges", "Activation ranges of the reference pass");
    std::string c_model, c_frames;
    cal->add_option("model", c_model)->required();
    cal->add_option("frames", c_frames)->required();

    // calibrate-energy
    auto* cen = app.add_subcommand("calibrate-energy", "Fit energy coefficients to the headline figures");
    std::string e_out;
    double e_target_uj = 18.9, e_ref_s = 0.40, e_red = 0.35;
    cen->add_option("-o,--output", e_out)->required();
    cen->add_option("--target-uj", e_target_uj);
    cen->add_option("--reference-sparsity", e_ref_s);
    cen->add_option("--reduction", e_red);

    // resolve-config
    auto* res = app.add_subcommand("resolve-config", "Search channel widths against the parameter/FLOP budgets");
    std::string r_out;
    int r_top = 5;
    res->add_option("-o,--output", r_out, "Write the best config as JSON");
    res->add_option("--top", r_top);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto* sub = app.get_subcommands().front();
    rep.manifest["subcommand"] = sub->get_name();
    rep.manifest["argv"] = std::vector<std::string>(argv + 1, argv + argc);
    int status = 0;
    try {
        if (sub == agg) {
            rep.manifest["inputs"] = {{"events", agg_in}};
            rep.manifest["parameters"] = {{"mode", agg_mode}, {"dt_us", dt_us}, {"n_evt", n_evt}, {"t0", t0}, {"downsample", downsample_on}};
            rep.manifest["outputs"] = {{"frames", agg_out}};
            std::vector<Event> events;
            try {
                events = read_events_file(agg_in);
            } catch (const EventParseError& e) {
                throw CliError("parse_error", e.what());
            } catch (const std::runtime_error& e) {
                throw CliError("io_error", e.what());
            }
            auto frames = agg_mode == "time" ? aggregate_time(events, dt_us, t0) : aggregate_count(events, n_evt);
            if (downsample_on)
                for (auto& f : frames) f = downsample(f);
            std::ofstream out(agg_out, std::ios::binary);
            if (!out) throw CliError("io_error", "cannot write '" + agg_out + "'");
            write_frames(out, frames);
            double span_s = 0.0;
            if (events.size() > 1) span_s = double(events.back().t - events.front().t) / 1e6;
            double rate = 0.0;
            if (agg_mode == "time") rate = 1e6 / double(dt_us);
            else if (span_s > 0) rate = count_mode_frame_rate(double(events.size()) / span_s, n_evt);
            rep.results = {{"events", events.size()},
                           {"frames", frames.size()},
                           {"frame_height", frames.empty() ? 0 : frames.front().height},
                           {"frame_width", frames.empty() ? 0 : frames.front().width},
                           {"stream_seconds", span_s},
                           {"effective_frame_rate_hz", rate}};
            std::cerr << frames.size() << " frames, effective frame rate " << rate << " Hz\n";
        } else if (sub == init) {
            rep.manifest["parameters"] = {{"seed", seed}, {"float_only", float_only}};
            rep.manifest["outputs"] = {{"model", init_out}};
            ModelConfig cfg = default_model_config();
            if (!init_cfg.empty()) {
                std::ifstream in(init_cfg);
                if (!in) throw CliError("io_error", "cannot open config '" + init_cfg + "'");
                std::stringstream ss;
                ss << in.rdbuf();
                try {
                    cfg = model_config_from_json_string(ss.str());
                    validate(cfg);
                } catch (const ConfigError& e) {
                    throw CliError("config_error", e.what());
                }
                rep.manifest["inputs"] = {{"config", init_cfg}};
            }
            WeightSet ws = random_float_weights(cfg, seed);
            if (!float_only) ws = quantize_model(ws, cfg).weights;
            save_model_file(init_out, cfg, ws);
            rep.results = {{"params", total_params(cfg)}, {"macs_per_frame", total_macs(cfg)}, {"tensors", ws.tensors.size()}};
        } else if (sub == quant) {
            rep.manifest["inputs"] = {{"model", q_in}};
            rep.manifest["outputs"] = {{"model", q_out}};
            const auto lm = load_model_or_throw(q_in);
            QuantizedModel qm;
            try {
                qm = quantize_model(lm.weights, lm.config);
            } catch (const std::runtime_error& e) {
                throw CliError("format_error", e.what());
            }
            save_model_file(q_out, lm.config, qm.weights);
            load_model_file(q_out);  // round-trip check
            json layers = json::array();
            for (const auto& l : qm.report.layers) {
                layers.push_back({{"layer", l.layer},
                                  {"weights", l.weight_count},
                                  {"biases", l.bias_count},
                                  {"max_abs_error", l.max_abs_error},
                                  {"mean_abs_error", l.mean_abs_error},
                                  {"saturated", l.saturated}});
            }
            const auto& fp = qm.report.footprint;
            rep.results = {{"layers", layers},
                           {"footprint",
                            {{"weight_bytes_fp32", fp.weight_bytes_fp32},
                             {"weight_bytes_fixed", fp.weight_bytes_fixed},
                             {"weight_ratio", fp.weight_ratio()},
                             {"activation_bytes_fp32", fp.activation_bytes_fp32},
                             {"activation_bytes_fixed", fp.activation_bytes_fixed},
                             {"activation_ratio", fp.activation_ratio()},
                             {"bias_bytes", fp.bias_bytes}}},
                           {"round_trip_ok", true}};
            rep.counters = {{"params", qm.report.total_weights}, {"saturated", qm.report.total_saturated}};
        } else if (sub == inf) {
            rep.manifest["inputs"] = {{"model", i_model}, {"frames", i_frames}, {"ground_truth", i_gt}};
            rep.manifest["parameters"] = {{"mode", i_mode}, {"gates", i_gates}, {"compare", i_compare}};
            const auto lm = load_model_or_throw(i_model);
            const auto frames = load_frames(i_frames);
            Network net(lm.config, lm.weights);
            ForwardOptions opt;
            opt.precision = i_mode == "fixed" ? Precision::fixed : Precision::real;
            opt.gates = i_gates == "original" ? GateMode::original : GateMode::deployed;
            if (opt.precision == Precision::fixed && opt.gates == GateMode::original) {
                throw CliError("invalid_argument", "original gates are only available with --mode reference");
            }
            SequenceResult r;
            try {
                r = net.forward_sequence(frames, opt);
            } catch (const std::invalid_argument& e) {
                throw CliError("shape_mismatch", e.what());
            }
            json preds = json::array();
            for (size_t k = 0; k < r.predictions.size(); ++k) {
                json p = {{"frame", k}, {"x", r.predictions[k].x}, {"y", r.predictions[k].y}};
                if (opt.precision == Precision::fixed) p["raw"] = {r.predictions[k].raw_x, r.predictions[k].raw_y};
                preds.push_back(p);
            }
            rep.results["predictions"] = preds;
            if (i_compare) {
                ForwardOptions other = opt;
                other.precision = opt.precision == Precision::fixed ? Precision::real : Precision::fixed;
                other.gates = GateMode::deployed;
                const auto r2 = net.forward_sequence(frames, other);
                double max_d = 0.0, sum_d = 0.0;
                for (size_t k = 0; k < frames.size(); ++k) {
                    const double d = std::hypot(r.predictions[k].x - r2.predictions[k].x, r.predictions[k].y - r2.predictions[k].y);
                    max_d = std::max(max_d, d);
                    sum_d += d;
                }
                rep.results["fixed_vs_reference"] = {{"max_delta_px", max_d},
                                                     {"mean_delta_px", frames.empty() ? 0.0 : sum_d / double(frames.size())}};
            }
            if (!i_gt.empty()) {
                const auto gt = read_ground_truth(i_gt);
                double sum = 0.0;
                int n = 0;
                for (size_t k = 0; k < r.predictions.size(); ++k) {
                    auto it = gt.find(static_cast<int>(k));
                    if (it == gt.end()) continue;
                    sum += std::hypot(r.predictions[k].x - it->second.first, r.predictions[k].y - it->second.second);
                    ++n;
                }
                rep.results["pixel_error"] = {{"frames_with_ground_truth", n}, {"mean_euclidean_px", n ? sum / n : 0.0}};
            }
            rep.counters = counters_json(r.counters, lm.config);
        } else if (sub == sim) {
            rep.manifest["inputs"] = {{"model", s_model}, {"frames", s_frames}};
            const std::string coeff_path = s_coeffs.empty() ? default_coefficients_path() : s_coeffs;
            rep.manifest["parameters"] = {{"sparsity", s_sparsity},
                                          {"clock_hz", clock_hz},
                                          {"coefficients", coeff_path},
                                          {"include_leakage", leakage}};
            ModelConfig cfg = default_model_config();
            std::optional<LoadedModel> lm;
            if (!s_model.empty()) {
                lm = load_model_or_throw(s_model);
                cfg = lm->config;
            }
            std::optional<SequenceResult> measured;
            if (s_sparsity == "measured") {
                if (!lm || s_frames.empty()) throw CliError("invalid_argument", "--sparsity measured needs a model and frames");
                Network net(lm->config, lm->weights);
                measured = net.forward_sequence(load_frames(s_frames), ForwardOptions{});
            }
            const auto sp = parse_sparsity(s_sparsity, measured ? &measured->counters : nullptr);
            const auto coeffs = load_coeffs(s_coeffs);
            HardwareConfig hw;
            hw.pe.clock_hz = clock_hz;
            SimOptions so;
            so.include_leakage = leakage;
            SimReport r;
            try {
                r = simulate(cfg, hw, sp, coeffs, so);
            } catch (const SramOverflowError& e) {
                throw CliError("sram_overflow", e.what());
            } catch (const EnergyError& e) {
                throw CliError("missing_coefficients", e.what());
            }
            json stages = json::array();
            for (const auto& s : r.stages) stages.push_back(schedule_json(s));
            json layers = json::array();
            for (const auto& l : r.layers()) layers.push_back({{"layer", l.layer}, {"cycles", l.cycles}, {"utilization", l.utilization}});
            rep.results = {{"total_cycles", r.total_cycles},
                           {"latency_ms", r.latency_ms},
                           {"fps_single_frame", r.fps_single_frame},
                           {"fps_layer_pipelined", r.fps_layer_pipelined},
                           {"utilization", r.utilization},
                           {"mac_efficiency", r.mac_efficiency},
                           {"prefetch_overlap", r.prefetch_overlap},
                           {"sparsity", r.sparsity},
                           {"energy_uj_per_frame", r.energy.total() * 1e6},
                           {"energy_breakdown", energy_json(r.energy)},
                           {"dynamic_power_mw", r.dynamic_power_w * 1e3},
                           {"leakage_included", r.leakage_included},
                           {"layers", layers},
                           {"stages", stages}};
            if (trace) {
                json t = json::array();
                for (const auto& st : r.fsm_trace) t.push_back({{"state", std::string(to_string(st.state))}, {"stage", st.stage}, {"cycles", st.cycles}});
                rep.results["fsm_trace"] = t;
            }
            rep.counters = r.activity.by_class();
            if (measured) rep.counters["network"] = counters_json(measured->counters, cfg);
        } else if (sub == ver) {
            rep.manifest["inputs"] = {{"model", v_model}, {"frames", v_frames}};
            const auto lm = load_model_or_throw(v_model);
            const auto v = verify_datapath(lm.config, lm.weights, load_frames(v_frames));
            rep.results = {{"equivalent", v.equivalent}, {"frames", v.frames}, {"stages_compared", v.stages_compared},
                           {"elements_compared", v.elements_compared}};
            if (v.first_mismatch) {
                const auto& m = *v.first_mismatch;
                rep.results["first_mismatch"] = {{"frame", m.frame}, {"stage", m.stage}, {"index", m.index}, {"expected", m.expected}, {"got", m.got}};
                throw CliError("datapath_mismatch", "first mismatch in stage '" + m.stage + "'");
            }
        } else if (sub == cal) {
            rep.manifest["inputs"] = {{"model", c_model}, {"frames", c_frames}};
            const auto lm = load_model_or_throw(c_model);
            const auto rr = calibrate_ranges(lm.config, lm.weights, load_frames(c_frames));
            json entries = json::array();
            for (const auto& e : rr.entries)
                entries.push_back({{"tensor", e.tensor}, {"min", e.min}, {"max", e.max}, {"overflow_risk", e.overflow_risk}, {"log2_histogram", e.histogram}});
            rep.results = {{"frames", rr.frames}, {"any_overflow", rr.any_overflow()}, {"tensors", entries}};
        } else if (sub == cen) {
            rep.manifest["parameters"] = {{"target_uj", e_target_uj}, {"reference_sparsity", e_ref_s}, {"reduction", e_red}};
            rep.manifest["outputs"] = {{"coefficients", e_out}};
            const auto cfg = default_model_config();
            EnergyCoefficients unit;
            unit.pj = default_relative_coefficients();
            unit.pj["mac"] = 1.0;
            const HardwareConfig hw;
            const auto r0 = simulate(cfg, hw, SparsitySource::inject(0.0), unit);
            const auto r1 = simulate(cfg, hw, SparsitySource::inject(e_ref_s), unit);
            CalibrationTarget t;
            t.energy_per_frame_j = e_target_uj * 1e-6;
            t.reference_sparsity = e_ref_s;
            t.sparsity_energy_reduction = e_red;
            EnergyCoefficients c = calibrate_coefficients(r0.activity, r1.activity, default_relative_coefficients(), t);
            std::ostringstream note;
            note << "Fitted on the default config: " << e_target_uj << " uJ/frame at injected sparsity " << e_ref_s
                 << ", " << e_red << " energy reduction from sparsity 0. Calibration, not prediction.";
            c.note = note.str();
            write_text(e_out, coefficients_to_json(c));
            rep.results = {{"coefficients_pj", c.pj},
                           {"energy_uj_at_reference", estimate_energy(r1.activity, c).total() * 1e6},
                           {"energy_uj_at_zero", estimate_energy(r0.activity, c).total() * 1e6},
                           {"latency_ms", r1.latency_ms},
                           {"dynamic_power_mw", estimate_energy(r1.activity, c).total() / r1.latency_s * 1e3}};
        } else if (sub == res) {
            const auto cands = search_configs();
            json top = json::array();
            for (int i = 0; i < r_top && i < static_cast<int>(cands.size()); ++i) {
                const auto& c = cands[i];
                top.push_back({{"c1", c.dims.c1}, {"c2", c.dims.c2}, {"c3", c.dims.c3}, {"hidden", c.dims.hidden},
                               {"stem_stride", c.dims.stem_stride}, {"params", c.params}, {"macs", c.macs},
                               {"flops", 2 * c.macs}, {"score", c.score}});
            }
            rep.results = {{"candidates", cands.size()}, {"top", top}};
            if (cands.empty()) throw CliError("config_error", "no configuration satisfies the budgets");
            if (!r_out.empty()) {
                write_text(r_out, to_json_string(make_model_config(cands.front().dims), 2) + "\n");
                rep.manifest["outputs"] = {{"config", r_out}};
            }
        }
    } catch (const CliError& e) {
        rep.error = json{{"code", e.code}, {"message", e.what()}};
        status = 1;
    } catch (const ModelIoError& e) {
        rep.error = json{{"code", "format_error"}, {"message", e.what()}};
        status = 1;
    } catch (const ConfigError& e) {
        rep.error = json{{"code", "config_error"}, {"message", e.what()}};
        status = 1;
    } catch (const std::exception& e) {
        rep.error = json{{"code", "internal_error"}, {"message", e.what()}};
        status = 1;
    }
    const std::string text = rep.to_json().dump(2) + "\n";
    if (report_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(report_path);
        out << text;
    }
    if (status) std::cerr << "error: " << rep.error->at("message").get<std::string>() << "\n";
    return status;
}
