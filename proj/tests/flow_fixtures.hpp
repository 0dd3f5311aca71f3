#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "clvid/flowselect/flow.hpp"
#include "clvid/videodata/clip.hpp"

namespace fixtures {

// Smooth textured intensity in [0.1, 0.9], evaluated at (x - dx, y - dy) so
// the result is the base pattern translated by (+dx, +dy).
inline double pattern_at(double x, double y) {
    constexpr double tau = 2.0 * std::numbers::pi;
    return 0.5 + 0.18 * std::sin(tau * x / 17.0 + 0.3) * std::cos(tau * y / 13.0) +
           0.12 * std::sin(tau * (x + 0.7 * y) / 23.0) + 0.08 * std::cos(tau * (0.4 * x - y) / 11.0);
}

inline clvid::flow::Plane smooth_pattern(std::size_t h, std::size_t w, double dx, double dy) {
    clvid::flow::Plane p(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            p.at(y, x) = pattern_at(static_cast<double>(x) - dx, static_cast<double>(y) - dy);
    return p;
}

// Mean flow over the 64x64 frame excluding a 12-pixel border.
inline std::pair<double, double> interior_mean_flow(double dx, double dy, std::size_t size = 64, std::size_t border = 12) {
    const auto a = smooth_pattern(size, size, 0.0, 0.0);
    const auto b = smooth_pattern(size, size, dx, dy);
    const auto f = clvid::flow::estimate_flow(a, b, clvid::flow::FlowConfig{});
    double su = 0.0, sv = 0.0;
    std::size_t n = 0;
    for (std::size_t y = border; y + border < size; ++y)
        for (std::size_t x = border; x + border < size; ++x, ++n) {
            su += f.u[y * size + x];
            sv += f.v[y * size + x];
        }
    return {su / static_cast<double>(n), sv / static_cast<double>(n)};
}

// Three-channel clip whose frame f shows the pattern translated by
// (offsets_x[f], offsets_y[f]).
inline clvid::video::Clip clip_from_offsets(const std::vector<double>& offsets_x, std::size_t h, std::size_t w,
                                            const std::vector<double>& offsets_y = {}) {
    const clvid::video::ClipShape shape{offsets_x.size(), h, w, 3};
    std::vector<std::uint8_t> px;
    px.reserve(shape.total_bytes());
    for (std::size_t f = 0; f < offsets_x.size(); ++f) {
        const double oy = offsets_y.empty() ? 0.0 : offsets_y[f];
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double v = pattern_at(static_cast<double>(x) - offsets_x[f], static_cast<double>(y) - oy);
                const auto b = static_cast<std::uint8_t>(std::lround(255.0 * v));
                for (int c = 0; c < 3; ++c) px.push_back(b);
            }
    }
    return clvid::video::Clip(shape, std::move(px));
}

inline clvid::video::Clip translating_clip(std::size_t frames, std::size_t h, std::size_t w, double vx, double vy) {
    std::vector<double> ox(frames), oy(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        ox[f] = vx * static_cast<double>(f);
        oy[f] = vy * static_cast<double>(f);
    }
    return clip_from_offsets(ox, h, w, oy);
}

} // namespace fixtures
