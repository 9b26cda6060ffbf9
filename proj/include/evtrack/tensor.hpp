#pragma once

#include <cstdint>
#include <vector>

#include "evtrack/model_config.hpp"

namespace evtrack {

// Dense C x H x W tensor, channel-major.
template <class T>
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, T fill = T{}) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, fill) {}
    explicit Tensor(Shape3 s, T fill = T{}) : Tensor(s.c, s.h, s.w, fill) {}

    T& at(int ch, int y, int x) { return v[(size_t(ch) * h + y) * w + x]; }
    const T& at(int ch, int y, int x) const { return v[(size_t(ch) * h + y) * w + x]; }
    Shape3 shape() const { return {c, h, w}; }
    size_t size() const { return v.size(); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorQ = Tensor<int16_t>;  // raw Q5.11
using TensorR = Tensor<double>;

}  // namespace evtrack
