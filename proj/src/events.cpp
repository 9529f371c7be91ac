#include "snnhdc/events.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <numeric>

#include <fmt/format.h>

#include "snnhdc/errors.hpp"

namespace snnhdc::events {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'E', 'V', 'S', '1'};

template <typename T>
T read_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(static_cast<T>(bytes[offset + i]) << (8 * i));
    }
    return value;
}

template <typename T>
void write_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
    }
}

}  // namespace

FrameSequence::FrameSequence(std::size_t timesteps, std::size_t height, std::size_t width,
                             Duration dt)
    : timesteps_(timesteps),
      height_(height),
      width_(width),
      dt_(dt),
      counts_(timesteps * kChannels * height * width, 0) {}

std::uint64_t FrameSequence::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

EventStream parse_events(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw FormatError("missing EVS1 header");
    }
    EventStream stream;
    stream.sensor_width = read_le<std::uint16_t>(bytes, 4);
    stream.sensor_height = read_le<std::uint16_t>(bytes, 6);
    const auto label = read_le<std::uint32_t>(bytes, 8);
    const auto count = read_le<std::uint64_t>(bytes, 12);
    if (stream.sensor_width == 0 || stream.sensor_height == 0) {
        throw FormatError("EVS1 sensor dimensions must be positive");
    }
    if (label != kUnlabeled) stream.label = label;

    const std::size_t body = bytes.size() - kHeaderBytes;
    if (count > body / kRecordBytes || body != count * kRecordBytes) {
        throw FormatError(
            fmt::format("EVS1 body holds {} bytes, header declares {} records", body, count));
    }

    stream.events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t off = kHeaderBytes + i * kRecordBytes;
        Event e;
        e.t = read_le<std::uint64_t>(bytes, off);
        e.x = read_le<std::uint16_t>(bytes, off + 8);
        e.y = read_le<std::uint16_t>(bytes, off + 10);
        e.polarity = bytes[off + 12];
        if (e.x >= stream.sensor_width || e.y >= stream.sensor_height) {
            throw ValidationError(fmt::format("record {}: coordinate ({}, {}) outside {}x{} sensor",
                                              i, e.x, e.y, stream.sensor_width,
                                              stream.sensor_height));
        }
        if (e.polarity > 1) {
            throw ValidationError(fmt::format("record {}: polarity {} not in {{0,1}}", i,
                                              static_cast<int>(e.polarity)));
        }
        stream.events.push_back(e);
    }
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return stream;
}

std::vector<std::uint8_t> serialize_events(const EventStream& stream) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + stream.events.size() * kRecordBytes);
    for (const auto c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
    write_le(out, stream.sensor_width);
    write_le(out, stream.sensor_height);
    write_le(out, stream.label.value_or(kUnlabeled));
    write_le(out, static_cast<std::uint64_t>(stream.events.size()));
    for (const auto& e : stream.events) {
        write_le(out, e.t);
        write_le(out, e.x);
        write_le(out, e.y);
        out.push_back(e.polarity);
        out.push_back(0);
    }
    return out;
}

EventStream load_events(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_events(bytes);
}

void write_events(const std::filesystem::path& path, const EventStream& stream) {
    const auto bytes = serialize_events(stream);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

FrameSequence bin_to_frames(const EventStream& stream, Duration dt, Duration clip) {
    if (dt.us == 0 || clip.us == 0) throw ValidationError("dt and clip must be positive");
    const std::size_t steps = (clip.us + dt.us - 1) / dt.us;
    FrameSequence frames(steps, stream.sensor_height, stream.sensor_width, dt);
    for (const auto& e : stream.events) {
        if (e.t >= clip.us) continue;
        ++frames.at(e.t / dt.us, e.polarity, e.y, e.x);
    }
    return frames;
}

FrameSequence downsample(const FrameSequence& frames, std::size_t target_h, std::size_t target_w) {
    if (target_h == 0 || target_w == 0 || frames.height() % target_h != 0 ||
        frames.width() % target_w != 0) {
        throw ShapeError(fmt::format("cannot downsample {}x{} to {}x{}", frames.height(),
                                     frames.width(), target_h, target_w));
    }
    const std::size_t fy = frames.height() / target_h;
    const std::size_t fx = frames.width() / target_w;
    FrameSequence out(frames.timesteps(), target_h, target_w, frames.dt());
    for (std::size_t t = 0; t < frames.timesteps(); ++t) {
        for (std::size_t c = 0; c < FrameSequence::kChannels; ++c) {
            for (std::size_t y = 0; y < frames.height(); ++y) {
                for (std::size_t x = 0; x < frames.width(); ++x) {
                    out.at(t, c, y / fy, x / fx) += frames.at(t, c, y, x);
                }
            }
        }
    }
    return out;
}

}  // namespace snnhdc::events
