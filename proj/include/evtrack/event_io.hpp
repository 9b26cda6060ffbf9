#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace evtrack {

inline constexpr int kSensorWidth = 640;
inline constexpr int kSensorHeight = 480;
inline constexpr int kDownsampleFactor = 8;
inline constexpr uint64_t kDefaultWindowUs = 10000;
inline constexpr uint64_t kDefaultEventsPerFrame = 5000;

struct Event {
    uint64_t t = 0;  // microseconds
    uint16_t x = 0;
    uint16_t y = 0;
    int8_t p = 1;  // -1 or +1

    friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
    int width = kSensorWidth;
    int height = kSensorHeight;
};

class EventParseError : public std::runtime_error {
public:
    enum class Kind { malformed, timestamp_regression, out_of_bounds, bad_magic };
    EventParseError(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

enum class EventFormat { csv, binary };

inline constexpr char kEventMagic[8] = {'J', 'E', 'V', 'T', '0', '0', '0', '1'};
inline constexpr char kFrameMagic[8] = {'J', 'F', 'R', 'M', '0', '0', '0', '1'};
inline constexpr size_t kEventRecordBytes = 13;

std::vector<Event> parse_events(std::istream& in, EventFormat fmt, SensorGeometry geom = {});
std::vector<Event> read_events_file(const std::string& path, SensorGeometry geom = {});
// Picks the format from the leading magic.
EventFormat sniff_event_format(std::istream& in);

void write_events_csv(std::ostream& out, const std::vector<Event>& events);
void write_events_binary(std::ostream& out, const std::vector<Event>& events);

struct TimeWindow {
    int64_t t_start = 0;  // window is (t_start, t_start + dt]
    uint64_t dt = 0;
    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct CountWindow {
    uint64_t first_index = 0;
    uint64_t n_evt = 0;
    friend bool operator==(const CountWindow&, const CountWindow&) = default;
};

struct NoWindow {
    friend bool operator==(const NoWindow&, const NoWindow&) = default;
};

using WindowMeta = std::variant<NoWindow, TimeWindow, CountWindow>;

// Channel-major planar frame. Channel 0 counts positive events, channel 1
// negative events, channel 2 holds the signed polarity sum.
struct EventFrame {
    static constexpr int kChannels = 3;
    int height = 0;
    int width = 0;
    std::vector<int32_t> data;
    WindowMeta window;

    EventFrame() = default;
    EventFrame(int h, int w) : height(h), width(w), data(size_t(kChannels) * h * w, 0) {}

    int32_t& at(int c, int y, int x) { return data[(size_t(c) * height + y) * width + x]; }
    int32_t at(int c, int y, int x) const { return data[(size_t(c) * height + y) * width + x]; }
    size_t plane() const { return size_t(height) * width; }

    friend bool operator==(const EventFrame&, const EventFrame&) = default;
};

// t0 < 0 means "first event timestamp - 1" so the first event lands in frame 0.
std::vector<EventFrame> aggregate_time(const std::vector<Event>& events, uint64_t dt_us,
                                       int64_t t0 = -1, SensorGeometry geom = {});
std::vector<EventFrame> aggregate_count(const std::vector<Event>& events, uint64_t n_evt,
                                        SensorGeometry geom = {});
double count_mode_frame_rate(double events_per_second, uint64_t n_evt);

EventFrame downsample(const EventFrame& frame, int factor = kDownsampleFactor);

void write_frames(std::ostream& out, const std::vector<EventFrame>& frames);
std::vector<EventFrame> read_frames(std::istream& in);

}  // namespace evtrack
