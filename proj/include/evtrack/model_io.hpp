#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "evtrack/network.hpp"

namespace evtrack {

inline constexpr char kModelMagic[8] = {'J', 'A', 'N', 'E', '0', '0', '0', '1'};
inline constexpr int kModelFormatVersion = 1;

class ModelIoError : public std::runtime_error {
public:
    enum class Kind { bad_magic, truncated, checksum, unsupported_version, shape_mismatch, incomplete, malformed };
    ModelIoError(Kind k, const std::string& m) : std::runtime_error(m), kind_(k) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct LoadedModel {
    ModelConfig config;
    WeightSet weights;
};

// Every manifest tensor needs fixed values, float values, or both.
std::string save_model(const ModelConfig& cfg, const WeightSet& weights);
LoadedModel load_model(const std::string& bytes);

void save_model_file(const std::string& path, const ModelConfig& cfg, const WeightSet& weights);
LoadedModel load_model_file(const std::string& path);

uint32_t crc32_of(const void* data, size_t n);

}  // namespace evtrack
