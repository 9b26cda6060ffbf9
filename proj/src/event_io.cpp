#include "evtrack/event_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace evtrack {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

void check_event(const Event& e, const SensorGeometry& g, uint64_t prev_t, bool has_prev,
                 const std::string& where) {
    if (e.x >= g.width || e.y >= g.height) {
        throw EventParseError(EventParseError::Kind::out_of_bounds,
                              where + ": coordinate (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                  ") outside " + std::to_string(g.width) + "x" + std::to_string(g.height));
    }
    if (e.p != 1 && e.p != -1) {
        throw EventParseError(EventParseError::Kind::malformed,
                              where + ": polarity must be -1 or +1, got " + std::to_string(e.p));
    }
    if (has_prev && e.t < prev_t) {
        throw EventParseError(EventParseError::Kind::timestamp_regression,
                              where + ": timestamp regression " + std::to_string(prev_t) + " -> " +
                                  std::to_string(e.t));
    }
}

std::vector<Event> parse_csv(std::istream& in, const SensorGeometry& g) {
    std::vector<Event> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        std::array<std::string_view, 4> f;
        size_t n = 0;
        size_t start = 0;
        for (size_t i = 0; i <= sv.size(); ++i) {
            if (i == sv.size() || sv[i] == ',') {
                if (n == f.size()) { n = f.size() + 1; break; }
                f[n++] = sv.substr(start, i - start);
                start = i + 1;
            }
        }
        const std::string where = "line " + std::to_string(lineno);
        uint64_t t;
        uint32_t x, y;
        int p;
        if (n != 4 || !parse_int(f[0], t) || !parse_int(f[1], x) || !parse_int(f[2], y) || !parse_int(f[3], p)) {
            throw EventParseError(EventParseError::Kind::malformed, where + ": malformed record '" + line + "'");
        }
        if (x > 0xFFFF || y > 0xFFFF || p < -128 || p > 127) {
            throw EventParseError(EventParseError::Kind::out_of_bounds, where + ": field out of range");
        }
        Event e{t, static_cast<uint16_t>(x), static_cast<uint16_t>(y), static_cast<int8_t>(p)};
        check_event(e, g, out.empty() ? 0 : out.back().t, !out.empty(), where);
        out.push_back(e);
    }
    return out;
}

uint64_t get_le(const unsigned char* p, int n) {
    uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_le(std::ostream& out, uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, n);
}

std::vector<Event> parse_binary(std::istream& in, const SensorGeometry& g) {
    std::vector<Event> out;
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty()) return out;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kEventMagic, 8) != 0) {
        throw EventParseError(EventParseError::Kind::bad_magic, "offset 0: missing JEVT0001 magic");
    }
    const size_t body = bytes.size() - 8;
    if (body % kEventRecordBytes != 0) {
        const size_t off = 8 + (body / kEventRecordBytes) * kEventRecordBytes;
        throw EventParseError(EventParseError::Kind::malformed,
                              "offset " + std::to_string(off) + ": truncated record (" +
                                  std::to_string(body % kEventRecordBytes) + " of 13 bytes)");
    }
    out.reserve(body / kEventRecordBytes);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 8;
    for (size_t i = 0; i < body / kEventRecordBytes; ++i, p += kEventRecordBytes) {
        Event e;
        e.t = get_le(p, 8);
        e.x = static_cast<uint16_t>(get_le(p + 8, 2));
        e.y = static_cast<uint16_t>(get_le(p + 10, 2));
        e.p = static_cast<int8_t>(p[12]);
        check_event(e, g, out.empty() ? 0 : out.back().t, !out.empty(),
                    "offset " + std::to_string(8 + i * kEventRecordBytes));
        out.push_back(e);
    }
    return out;
}

}  // namespace

std::vector<Event> parse_events(std::istream& in, EventFormat fmt, SensorGeometry geom) {
    return fmt == EventFormat::csv ? parse_csv(in, geom) : parse_binary(in, geom);
}

EventFormat sniff_event_format(std::istream& in) {
    char buf[8] = {};
    in.read(buf, 8);
    const auto got = in.gcount();
    in.clear();
    in.seekg(0);
    if (got == 8 && std::memcmp(buf, kEventMagic, 8) == 0) return EventFormat::binary;
    return EventFormat::csv;
}

std::vector<Event> read_events_file(const std::string& path, SensorGeometry geom) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open event file '" + path + "'");
    return parse_events(in, sniff_event_format(in), geom);
}

void write_events_csv(std::ostream& out, const std::vector<Event>& events) {
    for (const auto& e : events) out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
}

void write_events_binary(std::ostream& out, const std::vector<Event>& events) {
    out.write(kEventMagic, 8);
    for (const auto& e : events) {
        put_le(out, e.t, 8);
        put_le(out, e.x, 2);
        put_le(out, e.y, 2);
        put_le(out, static_cast<uint8_t>(e.p), 1);
    }
}

std::vector<EventFrame> aggregate_time(const std::vector<Event>& events, uint64_t dt_us, int64_t t0,
                                       SensorGeometry geom) {
    if (dt_us == 0) throw std::invalid_argument("aggregate_time: dt must be positive");
    std::vector<EventFrame> frames;
    if (events.empty()) return frames;
    if (t0 < 0) t0 = static_cast<int64_t>(events.front().t) - 1;
    const auto last = static_cast<int64_t>(events.back().t);
    if (last <= t0) return frames;
    const uint64_t span = static_cast<uint64_t>(last - t0);
    const uint64_t k_frames = (span + dt_us - 1) / dt_us;
    frames.reserve(k_frames);
    for (uint64_t k = 0; k < k_frames; ++k) {
        frames.emplace_back(geom.height, geom.width);
        frames.back().window = TimeWindow{t0 + static_cast<int64_t>(k * dt_us), dt_us};
    }
    const size_t plane = frames.front().plane();
    for (const auto& e : events) {
        const auto t = static_cast<int64_t>(e.t);
        if (t <= t0) continue;
        const uint64_t k = (static_cast<uint64_t>(t - t0) - 1) / dt_us;
        int32_t* d = frames[k].data.data();
        const size_t pix = size_t(e.y) * geom.width + e.x;
        d[(e.p > 0 ? 0 : plane) + pix] += 1;
        d[2 * plane + pix] += e.p;
    }
    return frames;
}

std::vector<EventFrame> aggregate_count(const std::vector<Event>& events, uint64_t n_evt, SensorGeometry geom) {
    if (n_evt == 0) throw std::invalid_argument("aggregate_count: n_evt must be positive");
    const size_t k_frames = events.size() / n_evt;
    std::vector<EventFrame> frames;
    frames.reserve(k_frames);
    for (size_t k = 0; k < k_frames; ++k) {
        EventFrame f(geom.height, geom.width);
        f.window = CountWindow{k * n_evt, n_evt};
        const size_t plane = f.plane();
        int32_t* d = f.data.data();
        for (size_t i = k * n_evt; i < (k + 1) * n_evt; ++i) {
            const auto& e = events[i];
            const size_t pix = size_t(e.y) * geom.width + e.x;
            d[(e.p > 0 ? 0 : plane) + pix] += 1;
            d[2 * plane + pix] += e.p;
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

double count_mode_frame_rate(double events_per_second, uint64_t n_evt) {
    if (n_evt == 0) throw std::invalid_argument("n_evt must be positive");
    return events_per_second / static_cast<double>(n_evt);
}

EventFrame downsample(const EventFrame& frame, int factor) {
    if (factor <= 0 || frame.height % factor != 0 || frame.width % factor != 0) {
        throw std::invalid_argument("downsample: frame " + std::to_string(frame.width) + "x" +
                                    std::to_string(frame.height) + " not divisible by " + std::to_string(factor));
    }
    const int oh = frame.height / factor;
    const int ow = frame.width / factor;
    const int64_t area = int64_t{factor} * factor;
    EventFrame out(oh, ow);
    out.window = frame.window;
    for (int c = 0; c < 2; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                int64_t s = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) s += frame.at(c, oy * factor + dy, ox * factor + dx);
                // Round-half-to-even of s / area.
                int64_t q = s / area;
                int64_t r = s % area;
                if (r < 0) { r += area; --q; }
                if (2 * r > area || (2 * r == area && (q & 1))) ++q;
                out.at(c, oy, ox) = static_cast<int32_t>(q);
            }
        }
    }
    // Derived so that the signed plane stays equal to pos - neg after rounding.
    for (size_t i = 0; i < out.plane(); ++i) out.data[2 * out.plane() + i] = out.data[i] - out.data[out.plane() + i];
    return out;
}

void write_frames(std::ostream& out, const std::vector<EventFrame>& frames) {
    for (const auto& f : frames) {
        out.write(kFrameMagic, 8);
        put_le(out, static_cast<uint16_t>(f.height), 2);
        put_le(out, static_cast<uint16_t>(f.width), 2);
        put_le(out, EventFrame::kChannels, 2);
        for (int32_t v : f.data) put_le(out, static_cast<uint32_t>(v), 4);
    }
}

std::vector<EventFrame> read_frames(std::istream& in) {
    std::vector<EventFrame> frames;
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    size_t off = 0;
    while (off < bytes.size()) {
        if (bytes.size() - off < 14 || std::memcmp(p + off, kFrameMagic, 8) != 0) {
            throw std::runtime_error("frame dump: bad header at offset " + std::to_string(off));
        }
        const int h = static_cast<int>(get_le(p + off + 8, 2));
        const int w = static_cast<int>(get_le(p + off + 10, 2));
        const int c = static_cast<int>(get_le(p + off + 12, 2));
        if (c != EventFrame::kChannels) {
            throw std::runtime_error("frame dump: expected 3 channels, got " + std::to_string(c));
        }
        off += 14;
        const size_t n = size_t(c) * h * w;
        if (bytes.size() - off < n * 4) {
            throw std::runtime_error("frame dump: truncated frame " + std::to_string(frames.size()));
        }
        EventFrame f(h, w);
        for (size_t i = 0; i < n; ++i) f.data[i] = static_cast<int32_t>(static_cast<uint32_t>(get_le(p + off + 4 * i, 4)));
        off += n * 4;
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace evtrack
