#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "evtrack/event_io.hpp"
#include "oracles.hpp"

using namespace evtrack;

namespace {

std::vector<Event> parse_csv_text(const std::string& s, SensorGeometry g = {}) {
    std::istringstream in(s);
    return parse_events(in, EventFormat::csv, g);
}

EventParseError::Kind csv_error(const std::string& s, std::string* msg = nullptr) {
    try {
        parse_csv_text(s);
    } catch (const EventParseError& e) {
        if (msg) *msg = e.what();
        return e.kind();
    }
    ADD_FAILURE() << "no error for: " << s;
    return EventParseError::Kind::malformed;
}

int64_t total(const std::vector<EventFrame>& fs, int c) {
    int64_t n = 0;
    for (const auto& f : fs)
        for (size_t i = 0; i < f.plane(); ++i) n += f.data[c * f.plane() + i];
    return n;
}

}  // namespace

TEST(EventIo, CsvParsesCommentsBlanksAndSigns) {
    const auto ev = parse_csv_text("# t,x,y,p\n\n10,1,2,1\n 11 , 639 , 479 , -1 \n12,0,0,+1\r\n");
    ASSERT_EQ(ev.size(), 3u);
    EXPECT_EQ(ev[0], (Event{10, 1, 2, 1}));
    EXPECT_EQ(ev[1], (Event{11, 639, 479, -1}));
    EXPECT_EQ(ev[2].p, 1);
}

TEST(EventIo, CsvErrorsNameTheLine) {
    std::string msg;
    EXPECT_EQ(csv_error("1,2,3,1\n2,2,3\n", &msg), EventParseError::Kind::malformed);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
    EXPECT_EQ(csv_error("5,0,0,1\n4,0,0,1\n", &msg), EventParseError::Kind::timestamp_regression);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
    EXPECT_EQ(csv_error("1,640,0,1\n"), EventParseError::Kind::out_of_bounds);
    EXPECT_EQ(csv_error("1,0,480,1\n"), EventParseError::Kind::out_of_bounds);
    EXPECT_EQ(csv_error("1,0,0,0\n"), EventParseError::Kind::malformed);
    EXPECT_EQ(csv_error("1,0,0,2\n"), EventParseError::Kind::malformed);
    EXPECT_EQ(csv_error("a,0,0,1\n"), EventParseError::Kind::malformed);
    EXPECT_EQ(csv_error("1,0,0,1,7\n"), EventParseError::Kind::malformed);
    EXPECT_EQ(csv_error("-1,0,0,1\n"), EventParseError::Kind::malformed);
}

TEST(EventIo, EqualTimestampsAreAllowed) {
    EXPECT_EQ(parse_csv_text("3,0,0,1\n3,1,1,-1\n").size(), 2u);
}

TEST(EventIo, BinaryRoundTripAndSniff) {
    const auto ev = oracle::random_stream(4, 1000, {}, 50);
    std::stringstream bin;
    write_events_binary(bin, ev);
    EXPECT_EQ(bin.str().size(), 8 + 13 * ev.size());
    EXPECT_EQ(sniff_event_format(bin), EventFormat::binary);
    EXPECT_EQ(parse_events(bin, EventFormat::binary), ev);

    std::stringstream csv;
    write_events_csv(csv, ev);
    EXPECT_EQ(sniff_event_format(csv), EventFormat::csv);
    EXPECT_EQ(parse_events(csv, EventFormat::csv), ev);
}

TEST(EventIo, BinaryErrors) {
    std::istringstream empty("");
    EXPECT_TRUE(parse_events(empty, EventFormat::binary).empty());

    std::istringstream bad("NOTMAGIC");
    EXPECT_THROW(parse_events(bad, EventFormat::binary), EventParseError);

    std::stringstream s;
    write_events_binary(s, {{1, 0, 0, 1}, {2, 0, 0, 1}});
    std::string bytes = s.str();
    std::istringstream cut(bytes.substr(0, bytes.size() - 3));
    try {
        parse_events(cut, EventFormat::binary);
        FAIL();
    } catch (const EventParseError& e) {
        EXPECT_NE(std::string(e.what()).find("offset 21"), std::string::npos) << e.what();
    }
    bytes[8 + 13 + 12] = 5;  // polarity of the second record
    std::istringstream badp(bytes);
    EXPECT_THROW(parse_events(badp, EventFormat::binary), EventParseError);
}

TEST(EventIo, TimeWindowsAreLeftOpenRightClosed) {
    const SensorGeometry g{8, 8};
    // t0 = 100, dt = 10: (100,110] (110,120] ...
    const std::vector<Event> ev{{101, 0, 0, 1}, {110, 1, 0, 1}, {111, 2, 0, -1}, {130, 3, 0, 1}};
    const auto fs = aggregate_time(ev, 10, 100, g);
    ASSERT_EQ(fs.size(), 3u);
    EXPECT_EQ(fs[0].at(0, 0, 0) + fs[0].at(0, 0, 1), 2);
    EXPECT_EQ(fs[1].at(1, 0, 2), 1);
    EXPECT_EQ(fs[1].at(2, 0, 2), -1);
    EXPECT_EQ(fs[2].at(0, 0, 3), 1);
    EXPECT_EQ(std::get<TimeWindow>(fs[1].window), (TimeWindow{110, 10}));
}

TEST(EventIo, DefaultOriginPutsFirstEventInFrameZero) {
    const SensorGeometry g{4, 4};
    const auto fs = aggregate_time({{50, 0, 0, 1}, {60, 0, 0, 1}}, 10, -1, g);
    ASSERT_EQ(fs.size(), 2u);  // (49,59] and (59,69]
    EXPECT_EQ(fs[0].at(0, 0, 0), 1);
    EXPECT_EQ(fs[1].at(0, 0, 0), 1);
    EXPECT_TRUE(aggregate_time({}, 10, -1, g).empty());
    EXPECT_THROW(aggregate_time({}, 0, -1, g), std::invalid_argument);
}

TEST(EventIo, AggregationMatchesPerEventOracle) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const SensorGeometry g{int(8 + rng() % 40), int(8 + rng() % 30)};
        const auto ev = oracle::random_stream(rng(), 1 + rng() % 5000, g, rng() % 40);
        const uint64_t dt = 1 + rng() % 2000;
        ASSERT_EQ(aggregate_time(ev, dt, -1, g), oracle::aggregate_time(ev, dt, -1, g)) << trial;
        const uint64_t n = 1 + rng() % 700;
        ASSERT_EQ(aggregate_count(ev, n, g), oracle::aggregate_count(ev, n, g)) << trial;
    }
}

TEST(EventIo, EveryEventLandsInExactlyOneFrame) {
    const SensorGeometry g{32, 24};
    const auto ev = oracle::random_stream(8, 20000, g, 7);
    const auto fs = aggregate_time(ev, 333, -1, g);
    const auto pos = std::count_if(ev.begin(), ev.end(), [](const Event& e) { return e.p > 0; });
    EXPECT_EQ(total(fs, 0), pos);
    EXPECT_EQ(total(fs, 1), int64_t(ev.size()) - pos);
    EXPECT_EQ(total(fs, 0) + total(fs, 1), int64_t(ev.size()));
}

TEST(EventIo, CountModeDropsTrailingPartialGroup) {
    const SensorGeometry g{16, 16};
    const auto ev = oracle::random_stream(2, 12345, g, 3);
    const auto fs = aggregate_count(ev, 5000, g);
    ASSERT_EQ(fs.size(), 2u);
    EXPECT_EQ(std::get<CountWindow>(fs[1].window), (CountWindow{5000, 5000}));
    EXPECT_EQ(total(fs, 0) + total(fs, 1), 10000);
    EXPECT_TRUE(aggregate_count(ev, 20000, g).empty());
}

TEST(EventIo, CountModeRate) {
    EXPECT_DOUBLE_EQ(count_mode_frame_rate(8750, 5000), 1.75);
    EXPECT_DOUBLE_EQ(count_mode_frame_rate(6.25e6, 5000), 1250.0);
}

TEST(EventIo, DownsampleMatchesRationalOracleAndKeepsChannelsConsistent) {
    const SensorGeometry g{640, 480};
    const auto ev = oracle::random_stream(17, 60000, g, 1);
    for (const auto& f : aggregate_count(ev, 20000, g)) {
        const auto d = downsample(f);
        EXPECT_EQ(d.height, 60);
        EXPECT_EQ(d.width, 80);
        EXPECT_EQ(d, oracle::downsample(f, 8));
        for (size_t i = 0; i < d.plane(); ++i) ASSERT_EQ(d.data[2 * d.plane() + i], d.data[i] - d.data[d.plane() + i]);
    }
    EXPECT_THROW(downsample(EventFrame(10, 10)), std::invalid_argument);
}

TEST(EventIo, DownsampleRoundsHalfToEven) {
    EventFrame f(8, 8);
    for (int i = 0; i < 32; ++i) f.data[i] = 1;  // 32/64 = 0.5 -> 0
    EXPECT_EQ(downsample(f).at(0, 0, 0), 0);
    for (int i = 0; i < 64; ++i) f.data[i] = i < 32 ? 3 : 0;  // 96/64 = 1.5 -> 2
    EXPECT_EQ(downsample(f).at(0, 0, 0), 2);
}

TEST(EventIo, FrameDumpRoundTrip) {
    const SensorGeometry g{80, 60};
    const auto fs = aggregate_count(oracle::random_stream(3, 3000, g, 2), 1000, g);
    std::stringstream s;
    write_frames(s, fs);
    EXPECT_EQ(s.str().size(), fs.size() * (14 + 3 * 80 * 60 * 4));
    const auto back = read_frames(s);
    ASSERT_EQ(back.size(), fs.size());
    for (size_t i = 0; i < fs.size(); ++i) EXPECT_EQ(back[i].data, fs[i].data);

    std::istringstream cut(s.str().substr(0, 100));
    EXPECT_THROW(read_frames(cut), std::runtime_error);
}
