#pragma once

#include <cstdint>
#include <vector>

#include "evtrack/network.hpp"
#include "evtrack/tensor.hpp"

namespace evtrack {

// Gate-path cost of a recurrent conv cell whose gates each apply a depthwise
// k x k conv over [x, h] followed by a 1x1 conv to the hidden width.
struct RecurrentGateCost {
    int gates = 0;
    int64_t gate_params = 0;
    int64_t gate_macs = 0;
};

RecurrentGateCost gate_path_cost(int gates, int in_c, int hidden, int k, int h, int w);
inline RecurrentGateCost convjanet_gate_cost(int in_c, int hidden, int k, int h, int w) {
    return gate_path_cost(2, in_c, hidden, k, h, w);
}
inline RecurrentGateCost convlstm_gate_cost(int in_c, int hidden, int k, int h, int w) {
    return gate_path_cost(4, in_c, hidden, k, h, w);
}

// Real-valued ConvLSTM with the same gate-path structure, kept as a
// comparison baseline. Gate order: input, forget, output, candidate.
class ConvLstmCell {
public:
    ConvLstmCell(int in_c, int hidden, int k, uint64_t seed);

    void reset(int h, int w);
    // Returns the new hidden state.
    const TensorR& step(const TensorR& x);
    const TensorR& cell() const { return c_; }
    const TensorR& hidden() const { return h_; }

    RecurrentGateCost cost(int h, int w) const { return convlstm_gate_cost(in_c_, hidden_, k_, h, w); }
    int64_t param_count() const;
    // In-bounds gate MACs executed by step(), accumulated since construction.
    const StageCounters& gate_counters() const { return gate_ctr_; }

private:
    struct Gate {
        std::vector<double> dw_w, dw_b, pw_w, pw_b;
    };
    int in_c_;
    int hidden_;
    int k_;
    Gate gates_[4];
    TensorR c_;
    TensorR h_;
    StageCounters gate_ctr_;
};

}  // namespace evtrack
