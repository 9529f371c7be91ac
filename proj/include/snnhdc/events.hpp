#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snnhdc::events {

struct Event {
    std::uint64_t t = 0;  // microseconds since stream start
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint8_t polarity = 0;  // 0 = off, 1 = on

    friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
    std::uint16_t sensor_width = 0;
    std::uint16_t sensor_height = 0;
    std::vector<Event> events;
    std::optional<std::uint32_t> label;
};

/// Microsecond duration used for binning.
struct Duration {
    std::uint64_t us = 0;

    static constexpr Duration from_ms(std::uint64_t ms) { return {ms * 1000}; }
    constexpr double ms() const { return static_cast<double>(us) / 1000.0; }
};

/// Dense count tensor [T x 2 x H x W], row-major in that order.
class FrameSequence {
public:
    static constexpr std::size_t kChannels = 2;

    FrameSequence() = default;
    FrameSequence(std::size_t timesteps, std::size_t height, std::size_t width, Duration dt);

    std::size_t timesteps() const { return timesteps_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return kChannels; }
    Duration dt() const { return dt_; }

    /// Elements in one timestep (2 * H * W).
    std::size_t frame_size() const { return kChannels * height_ * width_; }

    std::uint32_t& at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) {
        return counts_[index(t, c, y, x)];
    }
    std::uint32_t at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
        return counts_[index(t, c, y, x)];
    }

    std::span<const std::uint32_t> frame(std::size_t t) const {
        return {counts_.data() + t * frame_size(), frame_size()};
    }
    std::span<const std::uint32_t> data() const { return counts_; }

    std::uint64_t total() const;

private:
    std::size_t index(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
        return ((t * kChannels + c) * height_ + y) * width_ + x;
    }

    std::size_t timesteps_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    Duration dt_{1000};
    std::vector<std::uint32_t> counts_;
};

// EVS1 file format (little-endian):
//   "EVS1" u16 width u16 height u32 label(0xFFFFFFFF = none) u64 count
//   count x { u64 t_us, u16 x, u16 y, u8 polarity, u8 reserved }
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;
inline constexpr std::size_t kHeaderBytes = 4 + 2 + 2 + 4 + 8;
inline constexpr std::size_t kRecordBytes = 8 + 2 + 2 + 1 + 1;

/// Parses an EVS1 byte buffer. Events come back sorted by t (stable).
EventStream parse_events(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_events(const EventStream& stream);

EventStream load_events(const std::filesystem::path& path);
void write_events(const std::filesystem::path& path, const EventStream& stream);

/// Bins events into frames of length dt over the half-open window [0, clip).
FrameSequence bin_to_frames(const EventStream& stream, Duration dt, Duration clip);

/// Block-sums every (H/target_h x W/target_w) tile.
FrameSequence downsample(const FrameSequence& frames, std::size_t target_h, std::size_t target_w);

}  // namespace snnhdc::events
