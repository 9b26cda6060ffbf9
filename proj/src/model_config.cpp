#include "evtrack/model_config.hpp"

#include <set>

#include "json.hpp"

namespace evtrack {

using nlohmann::json;

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::gmlp: return "gmlp";
        case LayerKind::convjanet: return "convjanet";
        case LayerKind::global_max_pool: return "global_max_pool";
        case LayerKind::fully_connected: return "fully_connected";
    }
    return "conv2d";
}

LayerKind layer_kind_from_string(std::string_view s) {
    if (s == "conv2d") return LayerKind::conv2d;
    if (s == "gmlp") return LayerKind::gmlp;
    if (s == "convjanet") return LayerKind::convjanet;
    if (s == "global_max_pool") return LayerKind::global_max_pool;
    if (s == "fully_connected") return LayerKind::fully_connected;
    throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

std::string_view to_string(TensorRole r) { return r == TensorRole::weight ? "weight" : "bias"; }

int64_t TensorSpec::numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

int conv_out_dim(int in, int k, int stride, int pad) {
    const int span = in + 2 * pad - k;
    if (span < 0 || stride <= 0) return 0;
    return span / stride + 1;
}

ModelConfig make_model_config(const BackboneDims& d, Shape3 input) {
    ModelConfig cfg;
    cfg.input = input;
    auto conv = [](std::string name, int k, int in, int out, int stride) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::conv2d;
        l.kernel_h = l.kernel_w = k;
        l.in_channels = in;
        l.out_channels = out;
        l.stride = stride;
        l.padding = k / 2;
        l.activation = ActivationKind::relu;
        return l;
    };
    cfg.layers.push_back(conv("conv1", 7, input.c, d.c1, d.stem_stride));
    cfg.layers.push_back(conv("conv2", 3, d.c1, d.c2, 1));
    cfg.layers.push_back(conv("conv3", 3, d.c2, d.c3, 1));

    LayerSpec gmlp;
    gmlp.name = "gmlp";
    gmlp.kind = LayerKind::gmlp;

    LayerSpec janet;
    janet.name = "janet";
    janet.kind = LayerKind::convjanet;
    janet.kernel_h = janet.kernel_w = 3;
    janet.padding = 1;
    janet.out_channels = d.hidden;

    if (d.gmlp_first) {
        gmlp.in_channels = gmlp.out_channels = d.c3;
        janet.in_channels = d.c3;
        cfg.layers.push_back(gmlp);
        cfg.layers.push_back(janet);
    } else {
        janet.in_channels = d.c3;
        gmlp.in_channels = gmlp.out_channels = d.hidden;
        cfg.layers.push_back(janet);
        cfg.layers.push_back(gmlp);
    }

    LayerSpec pool;
    pool.name = "pool";
    pool.kind = LayerKind::global_max_pool;
    pool.in_channels = pool.out_channels = d.hidden;
    cfg.layers.push_back(pool);

    LayerSpec head;
    head.name = "head";
    head.kind = LayerKind::fully_connected;
    head.in_channels = d.hidden;
    head.out_channels = 2;
    cfg.layers.push_back(head);
    return cfg;
}

ModelConfig default_model_config() { return make_model_config(BackboneDims{}); }

std::vector<LayerShapes> layer_shapes(const ModelConfig& cfg) {
    std::vector<LayerShapes> out;
    Shape3 cur = cfg.input;
    for (const auto& l : cfg.layers) {
        LayerShapes s{cur, cur};
        switch (l.kind) {
            case LayerKind::conv2d:
                s.out = {l.out_channels, conv_out_dim(cur.h, l.kernel_h, l.stride, l.padding),
                         conv_out_dim(cur.w, l.kernel_w, l.stride, l.padding)};
                break;
            case LayerKind::gmlp: s.out = {l.out_channels, cur.h, cur.w}; break;
            case LayerKind::convjanet: s.out = {l.out_channels, cur.h, cur.w}; break;
            case LayerKind::global_max_pool: s.out = {cur.c, 1, 1}; break;
            case LayerKind::fully_connected: s.out = {l.out_channels, 1, 1}; break;
        }
        out.push_back(s);
        cur = s.out;
    }
    return out;
}

void validate(const ModelConfig& cfg) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (cfg.input.c <= 0 || cfg.input.h <= 0 || cfg.input.w <= 0) fail("input dims must be positive");
    if (!(cfg.weight_fmt == kWeightFmt) || !(cfg.act_fmt == kActivationFmt) || !(cfg.acc_fmt == kAccumFmt)) {
        fail("only Q1.7 weights, Q5.11 activations and 32-bit Q14.18 accumulators are supported");
    }
    if (!(cfg.output_scale > 0.0)) fail("output_scale must be positive");
    if (cfg.layers.size() < 2) fail("model needs at least global_max_pool and fully_connected");

    std::set<std::string> names;
    int channels = cfg.input.c;
    int h = cfg.input.h;
    int w = cfg.input.w;
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        const auto& l = cfg.layers[i];
        const std::string at = "layer " + std::to_string(i) + " ('" + l.name + "')";
        if (l.name.empty() || l.name.find('.') != std::string::npos) fail(at + ": name must be non-empty without '.'");
        if (!names.insert(l.name).second) fail(at + ": duplicate layer name");
        if (l.in_channels != channels) {
            fail(at + ": expects " + std::to_string(l.in_channels) + " input channels, previous layer gives " +
                 std::to_string(channels));
        }
        if (l.out_channels <= 0) fail(at + ": out_channels must be positive");
        const bool last = i + 1 == cfg.layers.size();
        const bool second_last = i + 2 == cfg.layers.size();
        switch (l.kind) {
            case LayerKind::conv2d: {
                if (l.kernel_h <= 0 || l.kernel_w <= 0 || l.stride <= 0 || l.padding < 0) fail(at + ": bad conv geometry");
                if (l.kernel_h * l.kernel_w > 49) fail(at + ": kernels above 7x7 do not fit the weight registers schedule");
                const int oh = conv_out_dim(h, l.kernel_h, l.stride, l.padding);
                const int ow = conv_out_dim(w, l.kernel_w, l.stride, l.padding);
                if (oh <= 0 || ow <= 0) fail(at + ": output would be empty");
                h = oh;
                w = ow;
                break;
            }
            case LayerKind::gmlp:
                if (l.out_channels != l.in_channels) fail(at + ": gmlp must keep the channel count");
                if (l.kernel_h != 1 || l.kernel_w != 1 || l.stride != 1 || l.padding != 0) fail(at + ": gmlp uses 1x1 convs");
                break;
            case LayerKind::convjanet:
                if (l.kernel_h != l.kernel_w || l.kernel_h % 2 == 0) fail(at + ": convjanet kernel must be odd and square");
                if (l.padding != l.kernel_h / 2 || l.stride != 1) fail(at + ": convjanet must preserve spatial dims");
                break;
            case LayerKind::global_max_pool:
                if (!second_last) fail(at + ": global_max_pool must be second to last");
                if (l.out_channels != l.in_channels) fail(at + ": pooling keeps channels");
                h = w = 1;
                break;
            case LayerKind::fully_connected:
                if (!last) fail(at + ": fully_connected must be the final layer");
                if (l.out_channels != 2) fail(at + ": head must output exactly 2 values");
                if (h != 1 || w != 1) fail(at + ": fully_connected needs a pooled input");
                break;
        }
        channels = l.out_channels;
    }
    if (cfg.layers[cfg.layers.size() - 2].kind != LayerKind::global_max_pool ||
        cfg.layers.back().kind != LayerKind::fully_connected) {
        fail("model must end with global_max_pool followed by fully_connected");
    }
}

std::vector<TensorSpec> tensor_manifest(const ModelConfig& cfg) {
    std::vector<TensorSpec> out;
    auto add = [&](const LayerSpec& l, const std::string& suffix, TensorRole role, std::vector<int> shape) {
        out.push_back(TensorSpec{l.name + "." + suffix, l.name, role, std::move(shape)});
    };
    for (const auto& l : cfg.layers) {
        switch (l.kind) {
            case LayerKind::conv2d:
                add(l, "weight", TensorRole::weight, {l.out_channels, l.in_channels, l.kernel_h, l.kernel_w});
                add(l, "bias", TensorRole::bias, {l.out_channels});
                break;
            case LayerKind::gmlp: {
                const int c = l.in_channels;
                add(l, "expand.weight", TensorRole::weight, {2 * c, c, 1, 1});
                add(l, "expand.bias", TensorRole::bias, {2 * c});
                add(l, "project.weight", TensorRole::weight, {c, c, 1, 1});
                add(l, "project.bias", TensorRole::bias, {c});
                break;
            }
            case LayerKind::convjanet: {
                const int cc = l.in_channels + l.out_channels;
                for (const char* gate : {"forget", "candidate"}) {
                    const std::string g = gate;
                    add(l, g + ".dw.weight", TensorRole::weight, {cc, 1, l.kernel_h, l.kernel_w});
                    add(l, g + ".dw.bias", TensorRole::bias, {cc});
                    add(l, g + ".pw.weight", TensorRole::weight, {l.out_channels, cc, 1, 1});
                    add(l, g + ".pw.bias", TensorRole::bias, {l.out_channels});
                }
                break;
            }
            case LayerKind::global_max_pool: break;
            case LayerKind::fully_connected:
                add(l, "weight", TensorRole::weight, {l.out_channels, l.in_channels});
                add(l, "bias", TensorRole::bias, {l.out_channels});
                break;
        }
    }
    return out;
}

std::vector<LayerCost> layer_costs(const ModelConfig& cfg) {
    const auto shapes = layer_shapes(cfg);
    std::vector<LayerCost> out;
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        const auto& l = cfg.layers[i];
        const int64_t hw_out = int64_t{shapes[i].out.h} * shapes[i].out.w;
        LayerCost c{l.name, l.kind, 0, 0, 0};
        switch (l.kind) {
            case LayerKind::conv2d: {
                const int64_t per_out = int64_t{l.in_channels} * l.kernel_h * l.kernel_w;
                c.params = per_out * l.out_channels + l.out_channels;
                c.macs = hw_out * l.out_channels * per_out;
                break;
            }
            case LayerKind::gmlp: {
                const int64_t ch = l.in_channels;
                c.params = (ch * 2 * ch + 2 * ch) + (ch * ch + ch);
                c.macs = hw_out * (ch * 2 * ch + ch * ch);
                c.elementwise_ops = hw_out * ch;
                break;
            }
            case LayerKind::convjanet: {
                const int64_t cc = l.in_channels + l.out_channels;
                const int64_t k2 = int64_t{l.kernel_h} * l.kernel_w;
                const int64_t gate_params = (cc * k2 + cc) + (cc * l.out_channels + l.out_channels);
                const int64_t gate_macs = hw_out * (cc * k2 + cc * l.out_channels);
                c.params = 2 * gate_params;
                c.macs = 2 * gate_macs;
                c.elementwise_ops = hw_out * l.out_channels * 2;
                break;
            }
            case LayerKind::global_max_pool:
                c.elementwise_ops = shapes[i].in.numel();
                break;
            case LayerKind::fully_connected:
                c.params = int64_t{l.in_channels} * l.out_channels + l.out_channels;
                c.macs = int64_t{l.in_channels} * l.out_channels;
                break;
        }
        out.push_back(c);
    }
    return out;
}

int64_t total_params(const ModelConfig& cfg) {
    int64_t n = 0;
    for (const auto& c : layer_costs(cfg)) n += c.params;
    return n;
}

int64_t total_macs(const ModelConfig& cfg) {
    int64_t n = 0;
    for (const auto& c : layer_costs(cfg)) n += c.macs;
    return n;
}

namespace {

json fmt_json(const QFormat& f) { return json{{"int_bits", f.int_bits}, {"frac_bits", f.frac_bits}}; }
QFormat fmt_from(const json& j) { return QFormat{j.at("int_bits").get<int>(), j.at("frac_bits").get<int>()}; }

}  // namespace

std::string to_json_string(const ModelConfig& cfg, int indent) {
    json j;
    j["name"] = cfg.name;
    j["input"] = {{"channels", cfg.input.c}, {"height", cfg.input.h}, {"width", cfg.input.w}};
    j["output_scale"] = cfg.output_scale;
    j["sensor_coordinates"] = cfg.sensor_coordinates;
    j["formats"] = {{"weight", fmt_json(cfg.weight_fmt)},
                    {"activation", fmt_json(cfg.act_fmt)},
                    {"accumulator", fmt_json(cfg.acc_fmt)}};
    json layers = json::array();
    for (const auto& l : cfg.layers) {
        layers.push_back({{"name", l.name},
                          {"kind", std::string(to_string(l.kind))},
                          {"kernel", {l.kernel_h, l.kernel_w}},
                          {"in_channels", l.in_channels},
                          {"out_channels", l.out_channels},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"activation", std::string(to_string(l.activation))}});
    }
    j["layers"] = layers;
    return j.dump(indent);
}

ModelConfig model_config_from_json_string(const std::string& text) {
    ModelConfig cfg;
    try {
        const json j = json::parse(text);
        cfg.name = j.value("name", cfg.name);
        const auto& in = j.at("input");
        cfg.input = {in.at("channels").get<int>(), in.at("height").get<int>(), in.at("width").get<int>()};
        cfg.output_scale = j.value("output_scale", cfg.output_scale);
        cfg.sensor_coordinates = j.value("sensor_coordinates", false);
        if (j.contains("formats")) {
            const auto& f = j.at("formats");
            cfg.weight_fmt = fmt_from(f.at("weight"));
            cfg.act_fmt = fmt_from(f.at("activation"));
            cfg.acc_fmt = fmt_from(f.at("accumulator"));
        }
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.name = lj.at("name").get<std::string>();
            l.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
            if (lj.contains("kernel")) {
                const auto& k = lj.at("kernel");
                if (k.is_array()) {
                    l.kernel_h = k.at(0).get<int>();
                    l.kernel_w = k.at(1).get<int>();
                } else {
                    l.kernel_h = l.kernel_w = k.get<int>();
                }
            }
            l.in_channels = lj.at("in_channels").get<int>();
            l.out_channels = lj.at("out_channels").get<int>();
            l.stride = lj.value("stride", 1);
            l.padding = lj.value("padding", 0);
            l.activation = activation_from_string(lj.value("activation", std::string("bypass")));
            cfg.layers.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config json: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

}  // namespace evtrack
