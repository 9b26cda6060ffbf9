#include "evtrack/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evtrack {

Footprint compute_footprint(const ModelConfig& cfg) {
    Footprint f;
    for (const auto& spec : tensor_manifest(cfg)) {
        const int64_t n = spec.numel();
        if (spec.role == TensorRole::weight) {
            f.weight_bytes_fp32 += 4 * n;
            f.weight_bytes_fixed += n * cfg.weight_fmt.total_bits() / 8;
        } else {
            f.bias_bytes += n * cfg.acc_fmt.total_bits() / 8;
        }
    }
    // Activation tensors: every layer output plus the input frame.
    int64_t acts = cfg.input.numel();
    for (const auto& s : layer_shapes(cfg)) acts += s.out.numel();
    f.activation_bytes_fp32 = 4 * acts;
    f.activation_bytes_fixed = acts * cfg.act_fmt.total_bits() / 8;
    return f;
}

QuantizedModel quantize_model(const WeightSet& float_weights, const ModelConfig& cfg) {
    validate(cfg);
    QuantizedModel out;
    auto& rep = out.report;
    std::map<std::string, LayerQuantStats> per_layer;
    std::vector<std::string> layer_order;
    for (const auto& spec : tensor_manifest(cfg)) {
        const auto& src = float_weights.at(spec.name);
        const auto n = static_cast<size_t>(spec.numel());
        if (src.real.size() != n) throw std::runtime_error("tensor '" + spec.name + "' lacks float values");
        const QFormat& fmt = spec.role == TensorRole::weight ? cfg.weight_fmt : cfg.acc_fmt;
        WeightTensor t;
        t.spec = spec;
        t.real = src.real;
        t.raw.resize(n);
        TensorQuantStats st{spec.name, spec.layer, spec.role, static_cast<int64_t>(n)};
        double sum_err = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double x = src.real[i];
            SatCounter sat;
            const FixedVal q = quantize(x, fmt, &sat);
            t.raw[i] = static_cast<int32_t>(q.raw);
            const double err = std::abs(q.value() - x);
            st.max_abs_error = std::max(st.max_abs_error, err);
            sum_err += err;
            st.saturated += static_cast<int64_t>(sat.count);
        }
        st.mean_abs_error = n ? sum_err / static_cast<double>(n) : 0.0;
        if (!per_layer.count(spec.layer)) {
            layer_order.push_back(spec.layer);
            per_layer[spec.layer].layer = spec.layer;
        }
        auto& ls = per_layer[spec.layer];
        if (spec.role == TensorRole::weight) {
            const double prev_sum = ls.mean_abs_error * static_cast<double>(ls.weight_count);
            ls.weight_count += st.count;
            ls.mean_abs_error = ls.weight_count ? (prev_sum + sum_err) / static_cast<double>(ls.weight_count) : 0.0;
            ls.max_abs_error = std::max(ls.max_abs_error, st.max_abs_error);
        } else {
            ls.bias_count += st.count;
        }
        ls.saturated += st.saturated;
        rep.total_weights += st.count;
        rep.total_saturated += st.saturated;
        rep.tensors.push_back(st);
        out.weights.tensors.emplace(spec.name, std::move(t));
    }
    for (const auto& name : layer_order) rep.layers.push_back(per_layer[name]);
    rep.footprint = compute_footprint(cfg);
    return out;
}

bool RangeReport::any_overflow() const {
    return std::any_of(entries.begin(), entries.end(), [](const RangeEntry& e) { return e.overflow_risk; });
}

const RangeEntry* RangeReport::find(const std::string& tensor) const {
    for (const auto& e : entries)
        if (e.tensor == tensor) return &e;
    return nullptr;
}

namespace {

int bucket_of(double v) {
    const double a = std::abs(v);
    if (a < std::ldexp(1.0, -11)) return 0;
    if (a >= 16.0) return kHistogramBuckets - 1;
    int e;
    std::frexp(a, &e);  // a in [2^(e-1), 2^e)
    return std::clamp(e + 11, 1, kHistogramBuckets - 2);
}

}  // namespace

RangeReport calibrate_ranges(const ModelConfig& cfg, const WeightSet& weights, const std::vector<EventFrame>& frames) {
    Network net(cfg, weights);
    RangeReport rep;
    std::map<std::string, size_t> index;
    auto record = [&](const std::string& name, const std::vector<double>& vals) {
        auto it = index.find(name);
        if (it == index.end()) {
            RangeEntry e;
            e.tensor = name;
            e.min = std::numeric_limits<double>::infinity();
            e.max = -std::numeric_limits<double>::infinity();
            e.histogram.assign(kHistogramBuckets, 0);
            it = index.emplace(name, rep.entries.size()).first;
            rep.entries.push_back(std::move(e));
        }
        auto& e = rep.entries[it->second];
        for (double v : vals) {
            e.min = std::min(e.min, v);
            e.max = std::max(e.max, v);
            e.histogram[bucket_of(v)]++;
        }
        e.overflow_risk = e.min < kActivationFmt.min_value() || e.max >= -kActivationFmt.min_value();
    };
    ForwardOptions opt;
    opt.precision = Precision::real;
    opt.observer = [&](const StageTrace& t) {
        if (t.real) record(t.pre_activation ? t.stage + ".pre" : t.stage, t.real->v);
    };
    for (const auto& f : frames) {
        record("input", Network::frame_to_real(f).v);
        net.step(f, opt);
        ++rep.frames;
    }
    return rep;
}

}  // namespace evtrack
