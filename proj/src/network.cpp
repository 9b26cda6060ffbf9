#include "evtrack/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace evtrack {

const WeightTensor& WeightSet::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("weight set has no tensor '" + name + "'");
    return it->second;
}

void WeightSet::check_complete(const ModelConfig& cfg, bool need_fixed, bool need_real) const {
    for (const auto& spec : tensor_manifest(cfg)) {
        auto it = tensors.find(spec.name);
        if (it == tensors.end()) throw std::runtime_error("missing tensor '" + spec.name + "'");
        const auto& t = it->second;
        if (t.spec.shape != spec.shape) throw std::runtime_error("tensor '" + spec.name + "' has the wrong shape");
        const auto n = static_cast<size_t>(spec.numel());
        if (need_fixed && t.raw.size() != n) throw std::runtime_error("tensor '" + spec.name + "' lacks fixed-point values");
        if (need_real && t.real.size() != n) throw std::runtime_error("tensor '" + spec.name + "' lacks float values");
    }
}

bool WeightSet::all_fixed() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const auto& kv) { return kv.second.has_fixed(); });
}

bool WeightSet::all_real() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const auto& kv) { return kv.second.has_real(); });
}

WeightSet random_float_weights(const ModelConfig& cfg, uint64_t seed, const WeightInit& init) {
    std::mt19937_64 rng(seed);
    WeightSet ws;
    for (const auto& spec : tensor_manifest(cfg)) {
        WeightTensor t;
        t.spec = spec;
        const auto n = static_cast<size_t>(spec.numel());
        t.real.resize(n);
        double lo = init.lo;
        double hi = init.hi;
        if (spec.role == TensorRole::bias) {
            lo = -init.bias_scale;
            hi = init.bias_scale;
        } else if (init.kind == WeightInit::Kind::fan_in) {
            int64_t fan_in = 1;
            for (size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
            const double a = std::min(0.99, std::sqrt(6.0 / static_cast<double>(fan_in)));
            lo = -a;
            hi = a;
        }
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : t.real) v = static_cast<float>(dist(rng));
        ws.tensors.emplace(spec.name, std::move(t));
    }
    return ws;
}

const StageCounters* CounterReport::find(const std::string& stage) const {
    for (const auto& s : stages)
        if (s.stage == stage) return &s;
    return nullptr;
}

uint64_t CounterReport::saturations() const {
    uint64_t n = 0;
    for (const auto& s : stages) n += s.saturations;
    return n;
}

std::vector<LayerCounterSummary> CounterReport::layers(const ModelConfig& cfg) const {
    std::vector<LayerCounterSummary> out;
    const auto costs = layer_costs(cfg);
    for (const auto& c : costs) {
        LayerCounterSummary s;
        s.layer = c.layer;
        s.params = c.params;
        int64_t outputs = 0;
        int64_t zeros = 0;
        const StageCounters* last = nullptr;
        for (const auto& st : stages) {
            if (st.layer != c.layer) continue;
            s.macs += st.macs;
            s.zero_operand_macs += st.zero_operand_macs;
            s.saturations += st.saturations;
            last = &st;
        }
        if (last) {
            outputs = last->outputs;
            zeros = last->zero_outputs;
        }
        s.output_sparsity = outputs ? double(zeros) / double(outputs) : 0.0;
        out.push_back(s);
    }
    return out;
}

TensorQ conv2d_fixed(const TensorQ& in, const ConvGeom& g, const int32_t* w, const int32_t* b, StageCounters* ctr) {
    if (in.c != g.in_c) throw std::invalid_argument("conv2d: input has " + std::to_string(in.c) + " channels, expected " + std::to_string(g.in_c));
    if (g.depthwise && g.in_c != g.out_c) throw std::invalid_argument("conv2d: depthwise needs in == out channels");
    const int oh = conv_out_dim(in.h, g.kh, g.stride, g.pad);
    const int ow = conv_out_dim(in.w, g.kw, g.stride, g.pad);
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: empty output");
    TensorQ out(g.out_c, oh, ow);
    SatCounter sat;
    int64_t macs = 0;
    int64_t zero_macs = 0;
    int64_t zero_out = 0;
    const int cin_per = g.depthwise ? 1 : g.in_c;
    for (int oc = 0; oc < g.out_c; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                int32_t acc = 0;
                for (int j = 0; j < cin_per; ++j) {
                    const int ic = g.depthwise ? oc : j;
                    const int32_t* wk = w + (size_t(oc) * cin_per + j) * g.kh * g.kw;
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const int iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= in.h) continue;
                        for (int kx = 0; kx < g.kw; ++kx) {
                            const int ix = ox * g.stride - g.pad + kx;
                            if (ix < 0 || ix >= in.w) continue;
                            const int16_t a = in.at(ic, iy, ix);
                            ++macs;
                            if (a == 0) {
                                ++zero_macs;
                                continue;  // contributes exactly zero
                            }
                            acc = mac(static_cast<int8_t>(wk[ky * g.kw + kx]), a, acc, &sat);
                        }
                    }
                }
                acc = add_sat32(acc, b[oc], &sat);
                const int16_t r = act::apply(g.act, truncate_to_activation(acc, &sat));
                out.at(oc, oy, ox) = r;
                zero_out += (r == 0);
            }
        }
    }
    if (ctr) {
        ctr->macs += macs;
        ctr->zero_operand_macs += zero_macs;
        ctr->outputs += static_cast<int64_t>(out.size());
        ctr->zero_outputs += zero_out;
        ctr->saturations += sat.count;
    }
    return out;
}

TensorR conv2d_real(const TensorR& in, const ConvGeom& g, const double* w, const double* b, StageCounters* ctr,
                    TensorR* pre) {
    if (in.c != g.in_c) throw std::invalid_argument("conv2d: input has " + std::to_string(in.c) + " channels, expected " + std::to_string(g.in_c));
    const int oh = conv_out_dim(in.h, g.kh, g.stride, g.pad);
    const int ow = conv_out_dim(in.w, g.kw, g.stride, g.pad);
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: empty output");
    TensorR out(g.out_c, oh, ow);
    if (pre) *pre = TensorR(g.out_c, oh, ow);
    int64_t macs = 0;
    int64_t zero_macs = 0;
    int64_t zero_out = 0;
    const int cin_per = g.depthwise ? 1 : g.in_c;
    for (int oc = 0; oc < g.out_c; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int j = 0; j < cin_per; ++j) {
                    const int ic = g.depthwise ? oc : j;
                    const double* wk = w + (size_t(oc) * cin_per + j) * g.kh * g.kw;
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const int iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= in.h) continue;
                        for (int kx = 0; kx < g.kw; ++kx) {
                            const int ix = ox * g.stride - g.pad + kx;
                            if (ix < 0 || ix >= in.w) continue;
                            const double a = in.at(ic, iy, ix);
                            ++macs;
                            zero_macs += (a == 0.0);
                            acc += wk[ky * g.kw + kx] * a;
                        }
                    }
                }
                acc += b[oc];
                if (pre) pre->at(oc, oy, ox) = acc;
                const double r = ref::apply(g.act, acc);
                out.at(oc, oy, ox) = r;
                zero_out += (r == 0.0);
            }
        }
    }
    if (ctr) {
        ctr->macs += macs;
        ctr->zero_operand_macs += zero_macs;
        ctr->outputs += static_cast<int64_t>(out.size());
        ctr->zero_outputs += zero_out;
    }
    return out;
}

Prediction prediction_from_raw(const ModelConfig& cfg, int16_t rx, int16_t ry) {
    const double s = cfg.output_scale * (cfg.sensor_coordinates ? kDownsampleFactor : 1);
    Prediction p;
    p.raw_x = rx;
    p.raw_y = ry;
    p.x = dequantize(rx, kActivationFmt) * s;
    p.y = dequantize(ry, kActivationFmt) * s;
    return p;
}

Prediction prediction_from_real(const ModelConfig& cfg, double x, double y) {
    const double s = cfg.output_scale * (cfg.sensor_coordinates ? kDownsampleFactor : 1);
    Prediction p;
    p.x = x * s;
    p.y = y * s;
    return p;
}

Network::Network(ModelConfig cfg, WeightSet weights) : cfg_(std::move(cfg)), weights_(std::move(weights)) {
    validate(cfg_);
    for (const auto& spec : tensor_manifest(cfg_)) {
        const auto& t = weights_.at(spec.name);
        if (t.spec.shape != spec.shape) throw std::runtime_error("tensor '" + spec.name + "' has the wrong shape");
        const auto n = static_cast<size_t>(spec.numel());
        std::vector<double> r(n);
        if (t.real.size() == n) {
            for (size_t i = 0; i < n; ++i) r[i] = t.real[i];
        } else if (t.raw.size() == n) {
            const QFormat& f = spec.role == TensorRole::weight ? cfg_.weight_fmt : cfg_.acc_fmt;
            for (size_t i = 0; i < n; ++i) r[i] = dequantize(t.raw[i], f);
        } else {
            throw std::runtime_error("tensor '" + spec.name + "' has no values");
        }
        real_w_.emplace(spec.name, std::move(r));
    }
    counters_.params = total_params(cfg_);
    counters_.macs_per_frame = total_macs(cfg_);
    reset();
}

void Network::reset() {
    state_q_.clear();
    state_r_.clear();
    const auto shapes = layer_shapes(cfg_);
    for (size_t i = 0; i < cfg_.layers.size(); ++i) {
        const auto& l = cfg_.layers[i];
        if (l.kind != LayerKind::convjanet) continue;
        state_q_[l.name] = TensorQ(shapes[i].out);
        state_r_[l.name] = TensorR(shapes[i].out);
    }
}

void Network::clear_counters() {
    counters_.stages.clear();
    counters_.frames = 0;
}

StageCounters& Network::ctr(const std::string& stage, const std::string& layer) {
    for (auto& s : counters_.stages)
        if (s.stage == stage) return s;
    counters_.stages.push_back(StageCounters{stage, layer});
    return counters_.stages.back();
}

const std::vector<double>& Network::rw(const std::string& name) const {
    auto it = real_w_.find(name);
    if (it == real_w_.end()) throw std::runtime_error("weight set has no tensor '" + name + "'");
    return it->second;
}

const int32_t* Network::qw(const std::string& name) const {
    const auto& t = weights_.at(name);
    if (t.raw.size() != static_cast<size_t>(t.spec.numel())) {
        throw std::runtime_error("tensor '" + name + "' lacks fixed-point values; quantize the model first");
    }
    return t.raw.data();
}

TensorQ Network::frame_to_fixed(const EventFrame& f, SatCounter* sat) {
    TensorQ t(EventFrame::kChannels, f.height, f.width);
    for (size_t i = 0; i < f.data.size(); ++i)
        t.v[i] = saturate16(int64_t{f.data[i]} << kActivationFmt.frac_bits, sat);
    return t;
}

TensorR Network::frame_to_real(const EventFrame& f) {
    TensorR t(EventFrame::kChannels, f.height, f.width);
    for (size_t i = 0; i < f.data.size(); ++i) t.v[i] = f.data[i];
    return t;
}

namespace {

ConvGeom conv_geom(const LayerSpec& l) {
    return ConvGeom{l.in_channels, l.out_channels, l.kernel_h, l.kernel_w, l.stride, l.padding, false, l.activation};
}

ConvGeom pointwise(int in, int out, ActivationKind a) { return ConvGeom{in, out, 1, 1, 1, 0, false, a}; }

ConvGeom depthwise(int c, int k) { return ConvGeom{c, c, k, k, 1, k / 2, true, ActivationKind::bypass}; }

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("concat: spatial dims differ");
    Tensor<T> out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
    return out;
}

}  // namespace

Prediction Network::step(const EventFrame& frame, const ForwardOptions& opt) {
    if (frame.height != cfg_.input.h || frame.width != cfg_.input.w || cfg_.input.c != EventFrame::kChannels) {
        throw std::invalid_argument("frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                                    ", model expects " + std::to_string(cfg_.input.w) + "x" +
                                    std::to_string(cfg_.input.h) + "x" + std::to_string(cfg_.input.c));
    }
    if (opt.precision == Precision::fixed) {
        SatCounter sat;
        TensorQ in = frame_to_fixed(frame, &sat);
        ctr("input", "input").saturations += sat.count;
        return step_tensor(&in, nullptr, opt);
    }
    TensorR in = frame_to_real(frame);
    return step_tensor(nullptr, &in, opt);
}

Prediction Network::step_tensor(const TensorQ* in_q, const TensorR* in_r, const ForwardOptions& opt) {
    const bool fixed = opt.precision == Precision::fixed;
    if (fixed && opt.gates == GateMode::original) {
        throw std::invalid_argument("original sigmoid/tanh/GELU gates exist only in real precision");
    }
    if ((fixed && !in_q) || (!fixed && !in_r)) throw std::invalid_argument("input tensor missing for precision");
    const bool orig = opt.gates == GateMode::original;
    auto observe_q = [&](const std::string& s, const TensorQ& t, bool pre = false) {
        if (opt.observer) opt.observer(StageTrace{s, pre, &t, nullptr});
    };
    auto observe_r = [&](const std::string& s, const TensorR& t, bool pre = false) {
        if (opt.observer) opt.observer(StageTrace{s, pre, nullptr, &t});
    };
    auto conv_r = [&](const TensorR& x, const ConvGeom& g, const std::string& wname, const std::string& bname,
                      const std::string& stage, const std::string& layer) {
        TensorR pre;
        TensorR y = conv2d_real(x, g, rw(wname).data(), rw(bname).data(), &ctr(stage, layer), opt.observer ? &pre : nullptr);
        if (opt.observer) observe_r(stage, pre, true);
        observe_r(stage, y);
        return y;
    };
    auto conv_q = [&](const TensorQ& x, const ConvGeom& g, const std::string& wname, const std::string& bname,
                      const std::string& stage, const std::string& layer) {
        TensorQ y = conv2d_fixed(x, g, qw(wname), qw(bname), &ctr(stage, layer));
        observe_q(stage, y);
        return y;
    };

    TensorQ xq = fixed ? *in_q : TensorQ{};
    TensorR xr = fixed ? TensorR{} : *in_r;

    for (const auto& l : cfg_.layers) {
        const std::string& n = l.name;
        switch (l.kind) {
            case LayerKind::conv2d:
                if (fixed) xq = conv_q(xq, conv_geom(l), n + ".weight", n + ".bias", n, n);
                else xr = conv_r(xr, conv_geom(l), n + ".weight", n + ".bias", n, n);
                break;
            case LayerKind::gmlp: {
                const int c = l.in_channels;
                const auto expand = pointwise(c, 2 * c, ActivationKind::bypass);
                const auto project = pointwise(c, c, ActivationKind::bypass);
                auto& gate_ctr = ctr(n + ".gate", n);
                if (fixed) {
                    TensorQ z = conv_q(xq, expand, n + ".expand.weight", n + ".expand.bias", n + ".expand", n);
                    TensorQ y(c, z.h, z.w);
                    SatCounter sat;
                    const size_t plane = size_t(z.h) * z.w;
                    for (size_t i = 0; i < size_t(c) * plane; ++i) {
                        y.v[i] = mul_activation(z.v[i], act::relu(z.v[i + size_t(c) * plane]), &sat);
                        gate_ctr.zero_outputs += (y.v[i] == 0);
                    }
                    gate_ctr.outputs += static_cast<int64_t>(y.size());
                    gate_ctr.saturations += sat.count;
                    observe_q(n + ".gate", y);
                    xq = conv_q(y, project, n + ".project.weight", n + ".project.bias", n + ".project", n);
                } else {
                    TensorR z = conv_r(xr, expand, n + ".expand.weight", n + ".expand.bias", n + ".expand", n);
                    TensorR y(c, z.h, z.w);
                    const size_t plane = size_t(z.h) * z.w;
                    for (size_t i = 0; i < size_t(c) * plane; ++i) {
                        const double z2 = z.v[i + size_t(c) * plane];
                        y.v[i] = z.v[i] * (orig ? ref::gelu(z2) : ref::relu(z2));
                        gate_ctr.zero_outputs += (y.v[i] == 0.0);
                    }
                    gate_ctr.outputs += static_cast<int64_t>(y.size());
                    observe_r(n + ".gate", y);
                    xr = conv_r(y, project, n + ".project.weight", n + ".project.bias", n + ".project", n);
                }
                break;
            }
            case LayerKind::convjanet: {
                const int cc = l.in_channels + l.out_channels;
                const auto dw = depthwise(cc, l.kernel_h);
                auto& cell_ctr = ctr(n + ".cell", n);
                if (fixed) {
                    TensorQ& c_prev = state_q_.at(n);
                    const TensorQ cat = concat_channels(xq, c_prev);
                    TensorQ fd = conv_q(cat, dw, n + ".forget.dw.weight", n + ".forget.dw.bias", n + ".forget.dw", n);
                    TensorQ f = conv_q(fd, pointwise(cc, l.out_channels, ActivationKind::hardsigmoid),
                                       n + ".forget.pw.weight", n + ".forget.pw.bias", n + ".forget.pw", n);
                    TensorQ gd = conv_q(cat, dw, n + ".candidate.dw.weight", n + ".candidate.dw.bias", n + ".candidate.dw", n);
                    TensorQ g = conv_q(gd, pointwise(cc, l.out_channels, ActivationKind::hardtanh),
                                       n + ".candidate.pw.weight", n + ".candidate.pw.bias", n + ".candidate.pw", n);
                    TensorQ c(f.c, f.h, f.w);
                    SatCounter sat;
                    for (size_t i = 0; i < c.size(); ++i) {
                        c.v[i] = blend(f.v[i], c_prev.v[i], g.v[i], &sat);
                        cell_ctr.zero_outputs += (c.v[i] == 0);
                    }
                    cell_ctr.outputs += static_cast<int64_t>(c.size());
                    cell_ctr.saturations += sat.count;
                    observe_q(n + ".cell", c);
                    c_prev = c;
                    xq = std::move(c);
                } else {
                    TensorR& c_prev = state_r_.at(n);
                    const TensorR cat = concat_channels(xr, c_prev);
                    const auto fa = orig ? ActivationKind::bypass : ActivationKind::hardsigmoid;
                    const auto ga = orig ? ActivationKind::bypass : ActivationKind::hardtanh;
                    TensorR fd = conv_r(cat, dw, n + ".forget.dw.weight", n + ".forget.dw.bias", n + ".forget.dw", n);
                    TensorR f = conv_r(fd, pointwise(cc, l.out_channels, fa), n + ".forget.pw.weight",
                                       n + ".forget.pw.bias", n + ".forget.pw", n);
                    TensorR gd = conv_r(cat, dw, n + ".candidate.dw.weight", n + ".candidate.dw.bias", n + ".candidate.dw", n);
                    TensorR g = conv_r(gd, pointwise(cc, l.out_channels, ga), n + ".candidate.pw.weight",
                                       n + ".candidate.pw.bias", n + ".candidate.pw", n);
                    if (orig) {
                        for (auto& v : f.v) v = ref::sigmoid(v);
                        for (auto& v : g.v) v = ref::tanh(v);
                    }
                    TensorR c(f.c, f.h, f.w);
                    for (size_t i = 0; i < c.size(); ++i) {
                        c.v[i] = f.v[i] * c_prev.v[i] + (1.0 - f.v[i]) * g.v[i];
                        cell_ctr.zero_outputs += (c.v[i] == 0.0);
                    }
                    cell_ctr.outputs += static_cast<int64_t>(c.size());
                    observe_r(n + ".cell", c);
                    c_prev = c;
                    xr = std::move(c);
                }
                break;
            }
            case LayerKind::global_max_pool: {
                auto& pc = ctr(n, n);
                if (fixed) {
                    TensorQ g(xq.c, 1, 1);
                    const size_t plane = size_t(xq.h) * xq.w;
                    for (int ch = 0; ch < xq.c; ++ch)
                        g.v[ch] = *std::max_element(xq.v.begin() + ch * plane, xq.v.begin() + (ch + 1) * plane);
                    for (auto v : g.v) pc.zero_outputs += (v == 0);
                    pc.outputs += g.c;
                    observe_q(n, g);
                    xq = std::move(g);
                } else {
                    TensorR g(xr.c, 1, 1);
                    const size_t plane = size_t(xr.h) * xr.w;
                    for (int ch = 0; ch < xr.c; ++ch)
                        g.v[ch] = *std::max_element(xr.v.begin() + ch * plane, xr.v.begin() + (ch + 1) * plane);
                    for (auto v : g.v) pc.zero_outputs += (v == 0.0);
                    pc.outputs += g.c;
                    observe_r(n, g);
                    xr = std::move(g);
                }
                break;
            }
            case LayerKind::fully_connected: {
                const auto g = pointwise(l.in_channels, l.out_channels, ActivationKind::bypass);
                if (fixed) xq = conv_q(xq, g, n + ".weight", n + ".bias", n, n);
                else xr = conv_r(xr, g, n + ".weight", n + ".bias", n, n);
                break;
            }
        }
    }
    ++counters_.frames;
    if (fixed) return prediction_from_raw(cfg_, xq.v[0], xq.v[1]);
    return prediction_from_real(cfg_, xr.v[0], xr.v[1]);
}

SequenceResult Network::forward_sequence(const std::vector<EventFrame>& frames, const ForwardOptions& opt) {
    reset();
    clear_counters();
    SequenceResult r;
    r.predictions.reserve(frames.size());
    for (const auto& f : frames) r.predictions.push_back(step(f, opt));
    r.counters = counters_;
    return r;
}

}  // namespace evtrack
