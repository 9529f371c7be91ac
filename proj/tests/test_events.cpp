#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "snnhdc/errors.hpp"
#include "snnhdc/events.hpp"
#include "snnhdc/rng.hpp"

using namespace snnhdc;
using namespace snnhdc::events;

namespace {

// Hand-rolled little-endian encoder, kept separate from serialize_events.
std::vector<std::uint8_t> encode(std::uint16_t w, std::uint16_t h, std::uint32_t label,
                                 const std::vector<Event>& evs) {
    std::vector<std::uint8_t> out{'E', 'V', 'S', '1'};
    auto put = [&](std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put(w, 2);
    put(h, 2);
    put(label, 4);
    put(evs.size(), 8);
    for (const auto& e : evs) {
        put(e.t, 8);
        put(e.x, 2);
        put(e.y, 2);
        put(e.polarity, 1);
        put(0, 1);
    }
    return out;
}

EventStream random_stream(std::uint64_t seed, std::size_t n, std::uint16_t size, std::uint64_t max_t) {
    Rng rng(seed);
    EventStream s;
    s.sensor_width = size;
    s.sensor_height = size;
    for (std::size_t i = 0; i < n; ++i) {
        s.events.push_back({rng.below(max_t), static_cast<std::uint16_t>(rng.below(size)),
                            static_cast<std::uint16_t>(rng.below(size)),
                            static_cast<std::uint8_t>(rng.below(2))});
    }
    return s;
}

}  // namespace

TEST_CASE("empty file parses to an empty stream") {
    const auto bytes = encode(128, 128, kUnlabeled, {});
    const auto s = parse_events(bytes);
    CHECK(s.events.empty());
    CHECK(s.sensor_width == 128);
    CHECK_FALSE(s.label.has_value());
}

TEST_CASE("records come back sorted by timestamp") {
    const auto bytes = encode(4, 4, 7, {{5, 1, 2, 1}, {3, 0, 0, 0}});
    const auto s = parse_events(bytes);
    REQUIRE(s.events.size() == 2);
    CHECK(s.events[0] == Event{3, 0, 0, 0});
    CHECK(s.events[1] == Event{5, 1, 2, 1});
    CHECK(s.label == 7u);
}

TEST_CASE("serialize matches an independent encoder and round-trips") {
    std::vector<Event> evs{{0, 1, 1, 0}, {10, 3, 2, 1}, {10, 0, 3, 1}, {999, 2, 0, 0}};
    const auto bytes = encode(4, 4, 2, evs);
    const auto s = parse_events(bytes);
    CHECK(serialize_events(s) == bytes);

    const auto path = std::filesystem::temp_directory_path() / "snnhdc_events_roundtrip.evs";
    write_events(path, s);
    const auto back = load_events(path);
    CHECK(back.events == s.events);
    CHECK(back.label == s.label);
    std::filesystem::remove(path);
}

TEST_CASE("load of a shuffled stream yields the same multiset, sorted") {
    auto s = random_stream(11, 500, 16, 5000);
    const auto back = parse_events(serialize_events(s));
    CHECK(std::is_sorted(back.events.begin(), back.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; }));
    auto key = [](const Event& e) { return std::tuple(e.t, e.x, e.y, e.polarity); };
    auto a = s.events;
    auto b = back.events;
    auto by_key = [&](const Event& l, const Event& r) { return key(l) < key(r); };
    std::sort(a.begin(), a.end(), by_key);
    std::sort(b.begin(), b.end(), by_key);
    CHECK(a == b);
}

TEST_CASE("malformed files are rejected") {
    SUBCASE("bad magic") {
        auto bytes = encode(4, 4, 0, {});
        bytes[3] = '2';
        CHECK_THROWS_AS(parse_events(bytes), FormatError);
    }
    SUBCASE("truncated body") {
        auto bytes = encode(4, 4, 0, {{1, 1, 1, 1}});
        bytes.pop_back();
        CHECK_THROWS_AS(parse_events(bytes), FormatError);
    }
    SUBCASE("short header") {
        std::vector<std::uint8_t> bytes{'E', 'V', 'S', '1', 0};
        CHECK_THROWS_AS(parse_events(bytes), FormatError);
    }
    SUBCASE("coordinate outside the sensor") {
        const auto bytes = encode(4, 4, 0, {{1, 1, 1, 1}, {2, 4, 0, 1}});
        CHECK_THROWS_WITH_AS(parse_events(bytes), doctest::Contains("record 1"), ValidationError);
    }
    SUBCASE("polarity out of range") {
        const auto bytes = encode(4, 4, 0, {{1, 1, 1, 2}});
        CHECK_THROWS_AS(parse_events(bytes), ValidationError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_events("/nonexistent/none.evs"), FormatError);
    }
}

TEST_CASE("events in the same millisecond share a frame") {
    EventStream s{4, 4, {{0, 2, 1, 1}, {999, 2, 1, 1}}, std::nullopt};
    const auto f = bin_to_frames(s, Duration::from_ms(1), Duration::from_ms(10));
    CHECK(f.timesteps() == 10);
    CHECK(f.at(0, 1, 1, 2) == 2);
    CHECK(f.at(0, 0, 1, 2) == 0);
    CHECK(f.total() == 2);
}

TEST_CASE("clip window is half-open") {
    EventStream s{4, 4, {{1499999, 0, 0, 0}, {1500000, 0, 0, 1}}, std::nullopt};
    const auto f = bin_to_frames(s, Duration::from_ms(1), Duration::from_ms(1500));
    CHECK(f.timesteps() == 1500);
    CHECK(f.total() == 1);
    CHECK(f.at(1499, 0, 0, 0) == 1);
}

TEST_CASE("timestep count rounds up a partial last frame") {
    EventStream s{2, 2, {{2500, 1, 1, 0}}, std::nullopt};
    const auto f = bin_to_frames(s, Duration{1000}, Duration{2500});
    CHECK(f.timesteps() == 3);
    CHECK(f.total() == 0);
}

TEST_CASE("binning rejects zero durations") {
    EventStream s{2, 2, {}, std::nullopt};
    CHECK_THROWS_AS(bin_to_frames(s, Duration{0}, Duration{1000}), ValidationError);
    CHECK_THROWS_AS(bin_to_frames(s, Duration{1000}, Duration{0}), ValidationError);
}

TEST_CASE("silent streams give all-zero frames") {
    EventStream s{8, 8, {}, std::nullopt};
    const auto f = bin_to_frames(s, Duration::from_ms(1), Duration::from_ms(5));
    CHECK(f.timesteps() == 5);
    CHECK(f.total() == 0);
}

TEST_CASE("binning conserves counts and ignores input order") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = random_stream(seed, 400, 8, 60000);
        const auto clip = Duration::from_ms(40);
        const auto retained = std::count_if(s.events.begin(), s.events.end(),
                                            [&](const Event& e) { return e.t < clip.us; });
        const auto f = bin_to_frames(s, Duration::from_ms(1), clip);
        CHECK(f.total() == static_cast<std::uint64_t>(retained));

        auto shuffled = s;
        std::shuffle(shuffled.events.begin(), shuffled.events.end(), std::mt19937_64(seed));
        const auto g = bin_to_frames(shuffled, Duration::from_ms(1), clip);
        CHECK(std::equal(f.data().begin(), f.data().end(), g.data().begin(), g.data().end()));
        // Each event lands at floor(t / dt).
        for (const auto& e : s.events) {
            if (e.t < clip.us) CHECK(f.at(e.t / 1000, e.polarity, e.y, e.x) > 0);
        }
    }
}

TEST_CASE("downsampling block-sums tiles") {
    FrameSequence ones(1, 128, 128, Duration{1000});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 128; ++y)
            for (std::size_t x = 0; x < 128; ++x) ones.at(0, c, y, x) = 1;
    const auto d = downsample(ones, 32, 32);
    CHECK(d.height() == 32);
    CHECK(std::all_of(d.data().begin(), d.data().end(), [](std::uint32_t v) { return v == 16; }));

    FrameSequence single(2, 128, 128, Duration{1000});
    single.at(1, 1, 0, 0) = 1;
    const auto e = downsample(single, 32, 32);
    CHECK(e.at(1, 1, 0, 0) == 1);
    CHECK(e.total() == 1);

    CHECK_THROWS_AS(downsample(single, 30, 30), ShapeError);
}

TEST_CASE("downsampling conserves totals on random frames") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        FrameSequence f(3, 16, 24, Duration{1000});
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t c = 0; c < 2; ++c)
                for (std::size_t y = 0; y < 16; ++y)
                    for (std::size_t x = 0; x < 24; ++x) f.at(t, c, y, x) = static_cast<std::uint32_t>(rng.below(5));
        const auto d = downsample(f, 4, 6);
        CHECK(d.total() == f.total());
        // Spot-check one tile against a direct sum.
        std::uint64_t tile = 0;
        for (std::size_t y = 4; y < 8; ++y)
            for (std::size_t x = 8; x < 12; ++x) tile += f.at(2, 1, y, x);
        CHECK(d.at(2, 1, 1, 2) == tile);
    }
}
