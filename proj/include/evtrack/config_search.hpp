#pragma once

#include <cstdint>
#include <vector>

#include "evtrack/accel_model.hpp"
#include "evtrack/model_config.hpp"

namespace evtrack {

struct BudgetTargets {
    int64_t params = 17600;
    int64_t macs = 5350000;  // 10.7M FLOPs / 2
    double tolerance = 0.10;
};

struct SearchSpace {
    std::vector<int> widths{4, 6, 8, 12, 16, 20, 24, 32, 40, 48, 64};
    std::vector<int> stem_strides{1, 2, 4};
    int min_hidden = 16;
};

struct Candidate {
    BackboneDims dims;
    int64_t params = 0;
    int64_t macs = 0;
    double score = 0.0;  // |dp|/P + |dm|/M
};

// Candidates inside both budgets whose activations fit the activation SRAM,
// best first. Ties break on the enumeration order (c1, c2, c3, hidden, stride).
std::vector<Candidate> search_configs(const BudgetTargets& t = {}, const SearchSpace& s = {},
                                      const HardwareConfig& hw = {});

}  // namespace evtrack
