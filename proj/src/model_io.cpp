#include "evtrack/model_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace evtrack {

using nlohmann::json;

uint32_t crc32_of(const void* data, size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    const auto* p = static_cast<const Bytef*>(data);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
        c = crc32(c, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<uint32_t>(c);
}

namespace {

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& s, size_t off) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + i]);
    return v;
}

const char* fixed_dtype(TensorRole r) { return r == TensorRole::weight ? "int8" : "int32"; }

size_t fixed_elem_bytes(TensorRole r) { return r == TensorRole::weight ? 1 : 4; }

}  // namespace

std::string save_model(const ModelConfig& cfg, const WeightSet& weights) {
    validate(cfg);
    std::string payload;
    json manifest = json::array();
    for (const auto& spec : tensor_manifest(cfg)) {
        if (!weights.has(spec.name)) {
            throw ModelIoError(ModelIoError::Kind::incomplete, "weight set is missing tensor '" + spec.name + "'");
        }
        const auto& t = weights.at(spec.name);
        const auto n = static_cast<size_t>(spec.numel());
        if (t.spec.shape != spec.shape) {
            throw ModelIoError(ModelIoError::Kind::shape_mismatch, "tensor '" + spec.name + "' shape differs from config");
        }
        const bool has_fixed = t.raw.size() == n;
        const bool has_float = t.real.size() == n;
        if (!has_fixed && !has_float) {
            throw ModelIoError(ModelIoError::Kind::incomplete, "tensor '" + spec.name + "' has no values");
        }
        json e = {{"name", spec.name},
                  {"layer", spec.layer},
                  {"role", std::string(to_string(spec.role))},
                  {"shape", spec.shape}};
        if (has_fixed) {
            const size_t eb = fixed_elem_bytes(spec.role);
            e["fixed"] = {{"dtype", fixed_dtype(spec.role)}, {"offset", payload.size()}, {"bytes", n * eb}};
            for (int32_t v : t.raw) {
                if (spec.role == TensorRole::weight) {
                    if (v < -128 || v > 127) {
                        throw ModelIoError(ModelIoError::Kind::malformed, "tensor '" + spec.name + "' has an out-of-range int8 value");
                    }
                    payload.push_back(static_cast<char>(static_cast<int8_t>(v)));
                } else {
                    put_u32(payload, static_cast<uint32_t>(v));
                }
            }
        } else {
            e["fixed"] = nullptr;
        }
        if (has_float) {
            e["float"] = {{"dtype", "float32"}, {"offset", payload.size()}, {"bytes", n * 4}};
            for (float f : t.real) {
                uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(payload, bits);
            }
        } else {
            e["float"] = nullptr;
        }
        manifest.push_back(e);
    }
    json header = {{"format_version", kModelFormatVersion},
                   {"config", json::parse(to_json_string(cfg))},
                   {"payload_bytes", payload.size()},
                   {"tensors", manifest}};
    const std::string htext = header.dump();
    std::string out(kModelMagic, 8);
    put_u32(out, static_cast<uint32_t>(htext.size()));
    out += htext;
    out += payload;
    put_u32(out, crc32_of(out.data(), out.size()));
    return out;
}

LoadedModel load_model(const std::string& bytes) {
    using K = ModelIoError::Kind;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 8) != 0) {
        throw ModelIoError(K::bad_magic, "not a model file (expected JANE0001 magic)");
    }
    if (bytes.size() < 12) throw ModelIoError(K::truncated, "truncated before header length");
    const uint32_t hlen = get_u32(bytes, 8);
    if (bytes.size() < 12 + size_t(hlen)) throw ModelIoError(K::truncated, "truncated inside the header");
    json header;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    } catch (const json::exception& e) {
        throw ModelIoError(K::malformed, std::string("header is not valid json: ") + e.what());
    }
    LoadedModel lm;
    try {
        const int version = header.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelIoError(K::unsupported_version, "unsupported format_version " + std::to_string(version));
        }
        lm.config = model_config_from_json_string(header.at("config").dump());
        const size_t payload_start = 12 + hlen;
        const size_t payload_bytes = header.at("payload_bytes").get<size_t>();
        const auto& tensors = header.at("tensors");
        const size_t avail = bytes.size() >= payload_start ? bytes.size() - payload_start : 0;

        // Truncation: name the first blob that runs past the available payload.
        auto blob_end = [](const json& b) { return b.at("offset").get<size_t>() + b.at("bytes").get<size_t>(); };
        for (const auto& e : tensors) {
            for (const char* key : {"fixed", "float"}) {
                if (e.contains(key) && !e.at(key).is_null() && blob_end(e.at(key)) > avail) {
                    throw ModelIoError(K::truncated, "file truncated inside tensor '" + e.at("name").get<std::string>() + "'");
                }
            }
        }
        if (avail < payload_bytes + 4) throw ModelIoError(K::truncated, "file truncated before checksum");
        if (avail > payload_bytes + 4) throw ModelIoError(K::malformed, "trailing bytes after checksum");
        const size_t body = payload_start + payload_bytes;
        if (crc32_of(bytes.data(), body) != get_u32(bytes, body)) {
            throw ModelIoError(K::checksum, "checksum mismatch");
        }

        validate(lm.config);
        const auto expected = tensor_manifest(lm.config);
        if (expected.size() != tensors.size()) {
            throw ModelIoError(K::shape_mismatch, "manifest has " + std::to_string(tensors.size()) + " tensors, config implies " +
                                                      std::to_string(expected.size()));
        }
        for (size_t i = 0; i < expected.size(); ++i) {
            const auto& e = tensors[i];
            const auto& spec = expected[i];
            const auto name = e.at("name").get<std::string>();
            if (name != spec.name) throw ModelIoError(K::shape_mismatch, "manifest entry " + std::to_string(i) + " is '" + name + "', expected '" + spec.name + "'");
            if (e.at("shape").get<std::vector<int>>() != spec.shape) {
                throw ModelIoError(K::shape_mismatch, "tensor '" + name + "' shape inconsistent with config");
            }
            const auto n = static_cast<size_t>(spec.numel());
            WeightTensor t;
            t.spec = spec;
            const char* p = bytes.data() + payload_start;
            if (!e.at("fixed").is_null()) {
                const auto& b = e.at("fixed");
                const size_t eb = fixed_elem_bytes(spec.role);
                if (b.at("bytes").get<size_t>() != n * eb || b.at("dtype").get<std::string>() != fixed_dtype(spec.role)) {
                    throw ModelIoError(K::shape_mismatch, "tensor '" + name + "' fixed blob size/dtype inconsistent");
                }
                const size_t off = b.at("offset").get<size_t>();
                t.raw.resize(n);
                for (size_t j = 0; j < n; ++j) {
                    if (eb == 1) t.raw[j] = static_cast<int8_t>(p[off + j]);
                    else {
                        uint32_t u = 0;
                        for (int k = 3; k >= 0; --k) u = (u << 8) | static_cast<unsigned char>(p[off + 4 * j + k]);
                        t.raw[j] = static_cast<int32_t>(u);
                    }
                }
            }
            if (e.contains("float") && !e.at("float").is_null()) {
                const auto& b = e.at("float");
                if (b.at("bytes").get<size_t>() != n * 4) {
                    throw ModelIoError(K::shape_mismatch, "tensor '" + name + "' float blob size inconsistent");
                }
                const size_t off = b.at("offset").get<size_t>();
                t.real.resize(n);
                for (size_t j = 0; j < n; ++j) {
                    uint32_t u = 0;
                    for (int k = 3; k >= 0; --k) u = (u << 8) | static_cast<unsigned char>(p[off + 4 * j + k]);
                    std::memcpy(&t.real[j], &u, 4);
                }
            }
            if (t.raw.empty() && t.real.empty() && n > 0) {
                throw ModelIoError(K::incomplete, "tensor '" + name + "' has no values");
            }
            lm.weights.tensors.emplace(name, std::move(t));
        }
    } catch (const json::exception& e) {
        throw ModelIoError(K::malformed, std::string("header field error: ") + e.what());
    } catch (const ConfigError& e) {
        throw ModelIoError(K::shape_mismatch, std::string("config: ") + e.what());
    }
    return lm;
}

void save_model_file(const std::string& path, const ModelConfig& cfg, const WeightSet& weights) {
    const std::string bytes = save_model(cfg, weights);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

LoadedModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

}  // namespace evtrack
