#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clvid/error.hpp"

namespace clvid::video {

struct ClipShape {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t frame_bytes() const noexcept { return height * width * channels; }
    std::size_t total_bytes() const noexcept { return frames * frame_bytes(); }

    friend bool operator==(const ClipShape&, const ClipShape&) = default;
};

inline std::string to_string(const ClipShape& s) {
    return std::to_string(s.frames) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
           std::to_string(s.channels);
}

// Fixed-shape sequence of 8-bit frames, stored frame-major then row, column,
// channel. `padded` marks clips extended by repeating their final frame.
class Clip {
public:
    Clip() = default;

    Clip(ClipShape shape, std::vector<std::uint8_t> pixels, std::size_t label = 0, std::uint64_t source_id = 0)
        : shape_(shape), pixels_(std::move(pixels)), label_(label), source_id_(source_id) {
        if (shape_.frames == 0 || shape_.height == 0 || shape_.width == 0 || shape_.channels == 0)
            throw DimensionError("clip extents must be positive, got " + to_string(shape_));
        if (pixels_.size() != shape_.total_bytes())
            throw DimensionError("clip pixel buffer has " + std::to_string(pixels_.size()) + " bytes, shape " +
                                 to_string(shape_) + " needs " + std::to_string(shape_.total_bytes()));
    }

    const ClipShape& shape() const noexcept { return shape_; }
    std::size_t frames() const noexcept { return shape_.frames; }
    std::size_t label() const noexcept { return label_; }
    void set_label(std::size_t y) noexcept { label_ = y; }
    std::uint64_t source_id() const noexcept { return source_id_; }
    void set_source_id(std::uint64_t id) noexcept { source_id_ = id; }
    bool padded() const noexcept { return padded_; }
    void set_padded(bool p) noexcept { padded_ = p; }

    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    std::span<const std::uint8_t> frame(std::size_t f) const {
        if (f >= shape_.frames) throw RangeError("frame index " + std::to_string(f) + " out of range");
        return std::span<const std::uint8_t>(pixels_).subspan(f * shape_.frame_bytes(), shape_.frame_bytes());
    }

    std::uint8_t at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
        return pixels_[((f * shape_.height + y) * shape_.width + x) * shape_.channels + c];
    }

    // New clip made of the given frames, in the given order.
    Clip select_frames(std::span<const std::size_t> indices) const {
        ClipShape s = shape_;
        s.frames = indices.size();
        std::vector<std::uint8_t> px;
        px.reserve(s.total_bytes());
        for (auto i : indices) {
            auto fr = frame(i);
            px.insert(px.end(), fr.begin(), fr.end());
        }
        Clip out(s, std::move(px), label_, source_id_);
        out.padded_ = padded_;
        return out;
    }

    friend bool operator==(const Clip& a, const Clip& b) {
        return a.shape_ == b.shape_ && a.pixels_ == b.pixels_;
    }

private:
    ClipShape shape_;
    std::vector<std::uint8_t> pixels_;
    std::size_t label_ = 0;
    std::uint64_t source_id_ = 0;
    bool padded_ = false;
};

// Luminance plane (0.299 R + 0.587 G + 0.114 B) of one frame; single-channel
// clips pass through, other channel counts average their channels.
inline std::vector<double> luminance(const Clip& clip, std::size_t f) {
    const auto& s = clip.shape();
    auto fr = clip.frame(f);
    std::vector<double> out(s.height * s.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint8_t* px = fr.data() + i * s.channels;
        if (s.channels == 3) {
            out[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        } else {
            double sum = 0.0;
            for (std::size_t c = 0; c < s.channels; ++c) sum += px[c];
            out[i] = sum / static_cast<double>(s.channels);
        }
    }
    return out;
}

} // namespace clvid::video
