#include "evtrack/datapath.hpp"

#include <algorithm>
#include <stdexcept>

namespace evtrack {

namespace {

constexpr int kTile = 8;

int16_t input_at(const TensorQ& in, int c, int y, int x) {
    if (y < 0 || y >= in.h || x < 0 || x >= in.w) return 0;  // zero padding
    return in.at(c, y, x);
}

}  // namespace

TileDatapath::TileDatapath(ModelConfig cfg, WeightSet weights, HardwareConfig hw)
    : cfg_(std::move(cfg)), weights_(std::move(weights)), hw_(hw) {
    schedule_ = build_schedule(cfg_, hw_);
    weights_.check_complete(cfg_, true, false);
    reset();
}

void TileDatapath::reset() {
    state_.clear();
    const auto shapes = layer_shapes(cfg_);
    for (size_t i = 0; i < cfg_.layers.size(); ++i)
        if (cfg_.layers[i].kind == LayerKind::convjanet) state_[cfg_.layers[i].name] = TensorQ(shapes[i].out);
}

const int32_t* TileDatapath::w(const std::string& name) const { return weights_.at(name).raw.data(); }

TensorQ TileDatapath::run_conv(const LayerSchedule& s, const TensorQ& in, const std::string& wname,
                               const std::string& bname) {
    const bool dw = s.kind == StageKind::depthwise;
    const bool os = s.mode == DataflowMode::output_stationary;
    const int k2 = s.kh * s.kw;
    const int ci = s.in.c;
    const int32_t* wt = w(wname);
    const int32_t* bias = w(bname);
    TensorQ out(s.out);
    const int tiles_y = (s.out.h + kTile - 1) / kTile;
    const int tiles_x = (s.out.w + kTile - 1) / kTile;
    std::vector<int32_t> acc(kTile * kTile);
    std::vector<int32_t> psum(kTile * kTile);  // tile buffer slot

    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            for (int u = 0; u < s.out_units; ++u) {
                const int ch_lo = dw ? u * kTile : u;
                const int ch_hi = dw ? std::min(s.out.c, ch_lo + kTile) : u + 1;
                for (int oc = ch_lo; oc < ch_hi; ++oc) {
                    std::fill(psum.begin(), psum.end(), 0);
                    std::fill(acc.begin(), acc.end(), 0);
                    for (int g = 0; g < s.channel_groups; ++g) {
                        const int ic_lo = dw ? oc : g * kTile;
                        const int ic_hi = dw ? oc + 1 : std::min(ci, ic_lo + kTile);
                        for (int ic = ic_lo; ic < ic_hi; ++ic) {
                            // WS: the accumulator is reloaded from the tile buffer for
                            // every input channel and written back after it.
                            if (!os) std::copy(psum.begin(), psum.end(), acc.begin());
                            const int32_t* wk = wt + (size_t(oc) * (dw ? 1 : ci) + (dw ? 0 : ic)) * k2;
                            for (int ky = 0; ky < s.kh; ++ky) {
                                for (int kx = 0; kx < s.kw; ++kx) {
                                    const auto wv = static_cast<int8_t>(wk[ky * s.kw + kx]);  // resident weight
                                    for (int py = 0; py < kTile; ++py) {
                                        const int oy = ty * kTile + py;
                                        if (oy >= s.out.h) break;
                                        for (int px = 0; px < kTile; ++px) {
                                            const int ox = tx * kTile + px;
                                            if (ox >= s.out.w) break;
                                            const int16_t a = input_at(in, ic, oy * s.stride - s.pad + ky,
                                                                       ox * s.stride - s.pad + kx);
                                            if (a == 0) {
                                                ++gated_;
                                                continue;
                                            }
                                            int32_t& r = acc[py * kTile + px];
                                            r = mac(wv, a, r);
                                        }
                                    }
                                }
                            }
                            if (!os) std::copy(acc.begin(), acc.end(), psum.begin());
                        }
                    }
                    if (!os) std::copy(psum.begin(), psum.end(), acc.begin());
                    for (int py = 0; py < kTile; ++py) {
                        const int oy = ty * kTile + py;
                        if (oy >= s.out.h) break;
                        for (int px = 0; px < kTile; ++px) {
                            const int ox = tx * kTile + px;
                            if (ox >= s.out.w) break;
                            const int32_t v = add_sat32(acc[py * kTile + px], bias[oc]);
                            out.at(oc, oy, ox) = act::apply(s.activation, truncate_to_activation(v));
                        }
                    }
                }
            }
        }
    }
    return out;
}

TensorQ TileDatapath::run_fc(const LayerSchedule& s, const TensorQ& in, const std::string& wname,
                             const std::string& bname) {
    const int n_in = s.in.c;
    const int n_out = s.out.c;
    const int32_t* wt = w(wname);
    const int32_t* bias = w(bname);
    TensorQ out(n_out, 1, 1);
    // Row-stationary: each PE row owns one output and walks the inputs.
    for (int og = 0; og < n_out; og += kTile) {
        int32_t acc[kTile] = {};
        for (int ig = 0; ig < n_in; ig += kTile) {
            for (int row = 0; row < kTile && og + row < n_out; ++row) {
                const int o = og + row;
                for (int i = ig; i < std::min(n_in, ig + kTile); ++i) {
                    if (in.v[i] == 0) {
                        ++gated_;
                        continue;
                    }
                    acc[row] = mac(static_cast<int8_t>(wt[size_t(o) * n_in + i]), in.v[i], acc[row]);
                }
            }
        }
        for (int row = 0; row < kTile && og + row < n_out; ++row)
            out.v[og + row] = truncate_to_activation(add_sat32(acc[row], bias[og + row]));
    }
    return out;
}

std::vector<std::pair<std::string, TensorQ>> TileDatapath::step(const TensorQ& input) {
    std::vector<std::pair<std::string, TensorQ>> out;
    std::map<std::string, const LayerSchedule*> by_stage;
    for (const auto& s : schedule_) by_stage[s.stage] = &s;
    auto sched = [&](const std::string& n) -> const LayerSchedule& { return *by_stage.at(n); };

    TensorQ x = input;
    for (const auto& l : cfg_.layers) {
        const std::string& n = l.name;
        switch (l.kind) {
            case LayerKind::conv2d:
                x = run_conv(sched(n), x, n + ".weight", n + ".bias");
                out.emplace_back(n, x);
                break;
            case LayerKind::gmlp: {
                TensorQ z = run_conv(sched(n + ".expand"), x, n + ".expand.weight", n + ".expand.bias");
                out.emplace_back(n + ".expand", z);
                const int c = l.in_channels;
                TensorQ y(c, z.h, z.w);
                const size_t half = y.size();
                for (size_t i = 0; i < half; i += hw_.pe.pes()) {
                    for (size_t lane = i; lane < std::min(half, i + hw_.pe.pes()); ++lane)
                        y.v[lane] = mul_activation(z.v[lane], act::relu(z.v[lane + half]));
                }
                out.emplace_back(n + ".gate", y);
                x = run_conv(sched(n + ".project"), y, n + ".project.weight", n + ".project.bias");
                out.emplace_back(n + ".project", x);
                break;
            }
            case LayerKind::convjanet: {
                TensorQ& c_prev = state_.at(n);
                TensorQ cat(x.c + c_prev.c, x.h, x.w);
                std::copy(x.v.begin(), x.v.end(), cat.v.begin());
                std::copy(c_prev.v.begin(), c_prev.v.end(), cat.v.begin() + static_cast<std::ptrdiff_t>(x.v.size()));
                TensorQ gates[2];
                int gi = 0;
                for (const char* gate : {"forget", "candidate"}) {
                    const std::string p = n + "." + gate;
                    TensorQ d = run_conv(sched(p + ".dw"), cat, p + ".dw.weight", p + ".dw.bias");
                    out.emplace_back(p + ".dw", d);
                    gates[gi] = run_conv(sched(p + ".pw"), d, p + ".pw.weight", p + ".pw.bias");
                    out.emplace_back(p + ".pw", gates[gi]);
                    ++gi;
                }
                TensorQ c(gates[0].shape());
                for (size_t i = 0; i < c.size(); ++i) c.v[i] = blend(gates[0].v[i], c_prev.v[i], gates[1].v[i]);
                out.emplace_back(n + ".cell", c);
                c_prev = c;
                x = std::move(c);
                break;
            }
            case LayerKind::global_max_pool: {
                TensorQ g(x.c, 1, 1);
                for (int ch = 0; ch < x.c; ++ch) {
                    int16_t m = x.at(ch, 0, 0);
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) m = std::max(m, x.at(ch, yy, xx));
                    g.v[ch] = m;
                }
                out.emplace_back(n, g);
                x = std::move(g);
                break;
            }
            case LayerKind::fully_connected:
                x = run_fc(sched(n), x, n + ".weight", n + ".bias");
                out.emplace_back(n, x);
                break;
        }
    }
    return out;
}

DatapathVerdict verify_datapath(const ModelConfig& cfg, const WeightSet& weights, const std::vector<EventFrame>& frames,
                                const HardwareConfig& hw) {
    Network net(cfg, weights);
    TileDatapath dp(cfg, weights, hw);
    DatapathVerdict v;
    std::vector<std::pair<std::string, TensorQ>> ref;
    ForwardOptions opt;
    opt.precision = Precision::fixed;
    opt.observer = [&](const StageTrace& t) {
        if (t.fixed && !t.pre_activation) ref.emplace_back(t.stage, *t.fixed);
    };
    for (const auto& f : frames) {
        ref.clear();
        net.step(f, opt);
        const auto got = dp.step(Network::frame_to_fixed(f));
        if (got.size() != ref.size()) throw std::logic_error("datapath and network stage lists differ");
        for (size_t i = 0; i < got.size(); ++i) {
            const auto& [name, t] = got[i];
            if (name != ref[i].first) throw std::logic_error("stage order differs at '" + name + "'");
            ++v.stages_compared;
            for (size_t j = 0; j < t.size(); ++j) {
                ++v.elements_compared;
                if (t.v[j] != ref[i].second.v[j] && !v.first_mismatch) {
                    v.equivalent = false;
                    v.first_mismatch = DatapathMismatch{v.frames, name, static_cast<int64_t>(j), ref[i].second.v[j], t.v[j]};
                }
            }
        }
        v.outputs.emplace_back(got.back().second.v[0], got.back().second.v[1]);
        ++v.frames;
    }
    return v;
}

}  // namespace evtrack
