#include "evtrack/convlstm.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "evtrack/activations.hpp"
#include "evtrack/network.hpp"

namespace evtrack {

RecurrentGateCost gate_path_cost(int gates, int in_c, int hidden, int k, int h, int w) {
    const int64_t cc = int64_t{in_c} + hidden;
    const int64_t k2 = int64_t{k} * k;
    const int64_t hw = int64_t{h} * w;
    RecurrentGateCost c;
    c.gates = gates;
    c.gate_params = gates * ((cc * k2 + cc) + (cc * hidden + hidden));
    c.gate_macs = gates * hw * (cc * k2 + cc * hidden);
    return c;
}

ConvLstmCell::ConvLstmCell(int in_c, int hidden, int k, uint64_t seed) : in_c_(in_c), hidden_(hidden), k_(k) {
    if (in_c <= 0 || hidden <= 0 || k <= 0 || k % 2 == 0) throw std::invalid_argument("ConvLstmCell: bad dims");
    std::mt19937_64 rng(seed);
    const int cc = in_c + hidden;
    std::uniform_real_distribution<double> dw(-1.0 / k, 1.0 / k);
    std::uniform_real_distribution<double> pw(-1.0 / std::sqrt(double(cc)), 1.0 / std::sqrt(double(cc)));
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    for (auto& g : gates_) {
        g.dw_w.resize(size_t(cc) * k * k);
        g.dw_b.resize(cc);
        g.pw_w.resize(size_t(hidden) * cc);
        g.pw_b.resize(hidden);
        for (auto& v : g.dw_w) v = dw(rng);
        for (auto& v : g.dw_b) v = bias(rng);
        for (auto& v : g.pw_w) v = pw(rng);
        for (auto& v : g.pw_b) v = bias(rng);
    }
}

int64_t ConvLstmCell::param_count() const {
    int64_t n = 0;
    for (const auto& g : gates_) n += int64_t(g.dw_w.size() + g.dw_b.size() + g.pw_w.size() + g.pw_b.size());
    return n;
}

void ConvLstmCell::reset(int h, int w) {
    c_ = TensorR(hidden_, h, w);
    h_ = TensorR(hidden_, h, w);
}

const TensorR& ConvLstmCell::step(const TensorR& x) {
    if (x.c != in_c_) throw std::invalid_argument("ConvLstmCell: channel mismatch");
    if (c_.h != x.h || c_.w != x.w) reset(x.h, x.w);
    const int cc = in_c_ + hidden_;
    TensorR cat(cc, x.h, x.w);
    std::copy(x.v.begin(), x.v.end(), cat.v.begin());
    std::copy(h_.v.begin(), h_.v.end(), cat.v.begin() + static_cast<std::ptrdiff_t>(x.v.size()));
    const ConvGeom dwg{cc, cc, k_, k_, 1, k_ / 2, true, ActivationKind::bypass};
    const ConvGeom pwg{cc, hidden_, 1, 1, 1, 0, false, ActivationKind::bypass};
    TensorR pre[4];
    for (int i = 0; i < 4; ++i) {
        const auto& g = gates_[i];
        TensorR d = conv2d_real(cat, dwg, g.dw_w.data(), g.dw_b.data(), &gate_ctr_);
        pre[i] = conv2d_real(d, pwg, g.pw_w.data(), g.pw_b.data(), &gate_ctr_);
    }
    for (size_t j = 0; j < c_.size(); ++j) {
        const double ig = ref::sigmoid(pre[0].v[j]);
        const double fg = ref::sigmoid(pre[1].v[j]);
        const double og = ref::sigmoid(pre[2].v[j]);
        const double cand = std::tanh(pre[3].v[j]);
        c_.v[j] = fg * c_.v[j] + ig * cand;
        h_.v[j] = og * std::tanh(c_.v[j]);
    }
    return h_;
}

}  // namespace evtrack
