#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "clvid/random.hpp"
#include "clvid/videodata/clip.hpp"

namespace clvid::video {

struct MotionPattern {
    double direction_deg;   // 0 = +x (right), 90 = +y (down)
    double speed;           // pixels per frame
};

// Entry 0 is static. The next eight cover the compass at speed 2, so any
// small class pool already spans every direction; slower and faster rings
// follow.
inline const std::vector<MotionPattern>& motion_table() {
    static const std::vector<MotionPattern> table = [] {
        std::vector<MotionPattern> t{{0.0, 0.0}};
        for (double speed : {2.0, 1.0, 3.0, 4.0})
            for (int d = 0; d < 8; ++d) t.push_back({45.0 * d, speed});
        return t;
    }();
    return table;
}

inline constexpr double kSyntheticNoiseSigma = 8.0;
inline constexpr double kBackgroundLevel = 40.0;
inline constexpr double kForegroundLevel = 210.0;

inline std::uint64_t synthetic_source_id(std::size_t class_id, std::size_t index) {
    return (static_cast<std::uint64_t>(class_id) << 32) | static_cast<std::uint64_t>(index);
}

namespace detail {

inline double wrap(double v, double period) {
    double r = std::fmod(v, period);
    return r < 0.0 ? r + period : r;
}

// Length of [a, a + len) intersected with [lo, lo + 1) on a circle of
// circumference `period`.
inline double wrapped_overlap(double a, double len, double lo, double period) {
    double total = 0.0;
    for (int k = -1; k <= 1; ++k) {
        const double s = a + k * period;
        total += std::max(0.0, std::min(s + len, lo + 1.0) - std::max(s, lo));
    }
    return std::min(total, 1.0);
}

} // namespace detail

// A bright anti-aliased square drifting with the class's motion pattern over
// a dark noisy background, wrapping at the borders. Each clip draws its start
// position and noise from (seed, class_id, index).
inline Clip render_synthetic_clip(std::size_t class_id, std::size_t index, const ClipShape& shape, std::uint64_t seed) {
    const auto& table = motion_table();
    if (class_id >= table.size())
        throw RangeError("class id " + std::to_string(class_id) + " beyond motion table of " +
                         std::to_string(table.size()) + " entries");
    if (shape.frames < 2 || shape.height == 0 || shape.width == 0 || shape.channels == 0)
        throw DimensionError("synthetic clips need at least 2 frames and positive extents, got " + to_string(shape));

    const auto& m = table[class_id];
    const double rad = m.direction_deg * std::numbers::pi / 180.0;
    const double vx = m.speed * std::cos(rad);
    const double vy = m.speed * std::sin(rad);
    const double H = static_cast<double>(shape.height), W = static_cast<double>(shape.width);
    const double side = std::max(2.0, std::floor(std::min(H, W) / 4.0));

    Rng rng(child_seed(seed, class_id, index));
    const double x0 = rng.uniform() * W;
    const double y0 = rng.uniform() * H;

    std::vector<std::uint8_t> px(shape.total_bytes());
    std::vector<double> cover_x(shape.width), cover_y(shape.height);
    std::size_t o = 0;
    for (std::size_t f = 0; f < shape.frames; ++f) {
        const double px0 = detail::wrap(x0 + vx * static_cast<double>(f), W);
        const double py0 = detail::wrap(y0 + vy * static_cast<double>(f), H);
        for (std::size_t x = 0; x < shape.width; ++x) cover_x[x] = detail::wrapped_overlap(px0, side, static_cast<double>(x), W);
        for (std::size_t y = 0; y < shape.height; ++y) cover_y[y] = detail::wrapped_overlap(py0, side, static_cast<double>(y), H);
        for (std::size_t y = 0; y < shape.height; ++y)
            for (std::size_t x = 0; x < shape.width; ++x) {
                const double base = kBackgroundLevel + cover_x[x] * cover_y[y] * (kForegroundLevel - kBackgroundLevel);
                for (std::size_t c = 0; c < shape.channels; ++c) {
                    const double v = base + rng.normal(0.0, kSyntheticNoiseSigma);
                    px[o++] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
                }
            }
    }
    return Clip(shape, std::move(px), class_id, synthetic_source_id(class_id, index));
}

inline std::vector<Clip> generate_synthetic_class(std::size_t class_id, std::size_t count, const ClipShape& shape,
                                                  std::uint64_t seed) {
    if (class_id >= motion_table().size())
        throw RangeError("class id " + std::to_string(class_id) + " beyond motion table of " +
                         std::to_string(motion_table().size()) + " entries");
    std::vector<Clip> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(render_synthetic_clip(class_id, i, shape, seed));
    return out;
}

} // namespace clvid::video
