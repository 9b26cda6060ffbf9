#include "oracles.hpp"

#include <random>

namespace oracle {

using evtrack::Event;
using evtrack::EventFrame;
using evtrack::SensorGeometry;
using evtrack::TensorQ;

int64_t floor_div(int64_t n, int64_t d) {
    int64_t q = n / d;
    if (q * d > n) --q;
    return q;
}

int64_t round_half_even_pow2(int64_t n, int s) {
    const int64_t d = int64_t{1} << s;
    const int64_t q = floor_div(n, d);
    const int64_t r = n - q * d;  // 0 <= r < d
    if (2 * r > d) return q + 1;
    if (2 * r < d) return q;
    return q % 2 == 0 ? q : q + 1;
}

int64_t clamp(int64_t v, int64_t lo, int64_t hi) { return v < lo ? lo : (v > hi ? hi : v); }

int16_t hardsigmoid(int16_t raw) {
    // x < -4 -> 0; x > 4 -> 1; else x/8 + 1/2. In raw units: r/8 + 1024.
    if (raw * 1 < -4 * 2048) return 0;
    if (raw * 1 > 4 * 2048) return 2048;
    return static_cast<int16_t>(floor_div(raw, 8) + 1024);
}

int16_t hardtanh(int16_t raw) {
    if (raw * 1 < -2 * 2048) return -2048;
    if (raw * 1 > 2 * 2048) return 2048;
    return static_cast<int16_t>(floor_div(raw, 2));
}

int16_t product_to_activation(int8_t w, int16_t a) {
    const int64_t p = int64_t{w} * int64_t{a};  // 18 fractional bits, exact
    return static_cast<int16_t>(clamp(round_half_even_pow2(p, 7), -32768, 32767));
}

namespace {

EventFrame blank(SensorGeometry g) { return EventFrame(g.height, g.width); }

void add(EventFrame& f, const Event& e) {
    if (e.p > 0) f.at(0, e.y, e.x) += 1;
    else f.at(1, e.y, e.x) += 1;
    f.at(2, e.y, e.x) += e.p;
}

}  // namespace

std::vector<EventFrame> aggregate_time(const std::vector<Event>& ev, uint64_t dt, int64_t t0, SensorGeometry g) {
    std::vector<EventFrame> out;
    if (ev.empty()) return out;
    if (t0 < 0) t0 = static_cast<int64_t>(ev.front().t) - 1;
    for (const auto& e : ev) {
        // Linear search for the window that contains e.t.
        size_t k = 0;
        while (!(t0 + int64_t(k * dt) < int64_t(e.t) && int64_t(e.t) <= t0 + int64_t((k + 1) * dt))) ++k;
        while (out.size() <= k) {
            out.push_back(blank(g));
            out.back().window = evtrack::TimeWindow{t0 + int64_t((out.size() - 1) * dt), dt};
        }
        add(out[k], e);
    }
    return out;
}

std::vector<EventFrame> aggregate_count(const std::vector<Event>& ev, uint64_t n, SensorGeometry g) {
    std::vector<EventFrame> out;
    for (size_t i = 0; i + n <= ev.size(); i += n) {
        EventFrame f = blank(g);
        f.window = evtrack::CountWindow{i, n};
        for (size_t j = i; j < i + n; ++j) add(f, ev[j]);
        out.push_back(f);
    }
    return out;
}

EventFrame downsample(const EventFrame& f, int factor) {
    EventFrame o(f.height / factor, f.width / factor);
    o.window = f.window;
    const int64_t area = int64_t{factor} * factor;
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < o.height; ++y) {
            for (int x = 0; x < o.width; ++x) {
                int64_t s = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) s += f.at(c, y * factor + dy, x * factor + dx);
                // s / area rounded half to even; area is not assumed to be a power of two.
                const int64_t q = floor_div(s, area);
                const int64_t r = s - q * area;
                int64_t v = q;
                if (2 * r > area || (2 * r == area && q % 2 != 0)) v = q + 1;
                o.at(c, y, x) = static_cast<int32_t>(v);
            }
        }
    }
    for (int y = 0; y < o.height; ++y)
        for (int x = 0; x < o.width; ++x) o.at(2, y, x) = o.at(0, y, x) - o.at(1, y, x);
    return o;
}

TensorQ conv_fixed(const TensorQ& in, int out_c, int k, int stride, int pad, bool depthwise,
                   const std::vector<int32_t>& w, const std::vector<int32_t>& b, int act) {
    const int oh = (in.h + 2 * pad - k) / stride + 1;
    const int ow = (in.w + 2 * pad - k) / stride + 1;
    TensorQ out(out_c, oh, ow);
    const int64_t lo = INT32_MIN;
    const int64_t hi = INT32_MAX;
    for (int oc = 0; oc < out_c; ++oc) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int64_t acc = 0;
                const int ic_lo = depthwise ? oc : 0;
                const int ic_hi = depthwise ? oc + 1 : in.c;
                for (int ic = ic_lo; ic < ic_hi; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = y * stride - pad + ky;
                            const int ix = x * stride - pad + kx;
                            if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                            const size_t wi = depthwise ? (size_t(oc) * k + ky) * k + kx
                                                        : ((size_t(oc) * in.c + ic) * k + ky) * k + kx;
                            acc = clamp(acc + int64_t{w[wi]} * in.at(ic, iy, ix), lo, hi);
                        }
                    }
                }
                acc = clamp(acc + b[oc], lo, hi);
                int64_t v = clamp(round_half_even_pow2(acc, 7), -32768, 32767);
                if (act == 1) v = v > 0 ? v : 0;
                else if (act == 2) v = hardsigmoid(static_cast<int16_t>(v));
                else if (act == 3) v = hardtanh(static_cast<int16_t>(v));
                out.at(oc, y, x) = static_cast<int16_t>(v);
            }
        }
    }
    return out;
}

std::vector<Event> random_stream(uint64_t seed, size_t n, SensorGeometry g, uint64_t max_gap_us) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> xs(0, g.width - 1);
    std::uniform_int_distribution<int> ys(0, g.height - 1);
    std::uniform_int_distribution<uint64_t> gap(0, max_gap_us);
    std::bernoulli_distribution pos(0.5);
    std::vector<Event> ev(n);
    uint64_t t = 1 + gap(rng);
    for (auto& e : ev) {
        t += gap(rng);
        e.t = t;
        e.x = static_cast<uint16_t>(xs(rng));
        e.y = static_cast<uint16_t>(ys(rng));
        e.p = pos(rng) ? 1 : -1;
    }
    return ev;
}

}  // namespace oracle
