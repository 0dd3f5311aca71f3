#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "clvid/diffcore/tensor.hpp"
#include "clvid/videodata/clip.hpp"

namespace clvid::video {

// Batch assembly for the MLP stand-in backbone: each frame is average-pooled
// onto a grid x grid lattice per channel, scaled to [0, 1], then every channel
// is standardized over the clip.
struct FeatureConfig {
    std::size_t window = 16;
    std::size_t grid = 4;

    std::size_t input_dim(std::size_t channels) const { return window * grid * grid * channels; }

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

inline std::vector<double> clip_features(const Clip& clip, const FeatureConfig& cfg) {
    const auto& s = clip.shape();
    if (s.frames != cfg.window)
        throw DimensionError("feature extraction expects " + std::to_string(cfg.window) + " frames, clip has " +
                             std::to_string(s.frames));
    if (cfg.grid == 0 || cfg.grid > s.height || cfg.grid > s.width)
        throw DimensionError("pooling grid " + std::to_string(cfg.grid) + " does not fit a " + std::to_string(s.height) +
                             "x" + std::to_string(s.width) + " frame");
    const std::size_t G = cfg.grid, C = s.channels;
    std::vector<double> out(s.frames * G * G * C, 0.0);
    for (std::size_t f = 0; f < s.frames; ++f)
        for (std::size_t gy = 0; gy < G; ++gy) {
            const std::size_t y0 = gy * s.height / G, y1 = (gy + 1) * s.height / G;
            for (std::size_t gx = 0; gx < G; ++gx) {
                const std::size_t x0 = gx * s.width / G, x1 = (gx + 1) * s.width / G;
                const double area = static_cast<double>((y1 - y0) * (x1 - x0)) * 255.0;
                for (std::size_t c = 0; c < C; ++c) {
                    double sum = 0.0;
                    for (std::size_t y = y0; y < y1; ++y)
                        for (std::size_t x = x0; x < x1; ++x) sum += clip.at(f, y, x, c);
                    out[((f * G + gy) * G + gx) * C + c] = sum / area;
                }
            }
        }
    for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0, sq = 0.0;
        const std::size_t n = out.size() / C;
        for (std::size_t i = c; i < out.size(); i += C) mean += out[i];
        mean /= static_cast<double>(n);
        for (std::size_t i = c; i < out.size(); i += C) sq += (out[i] - mean) * (out[i] - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        const double inv = sd > 1e-8 ? 1.0 / sd : 1.0;
        for (std::size_t i = c; i < out.size(); i += C) out[i] = (out[i] - mean) * inv;
    }
    return out;
}

// Stacks per-clip feature rows into a [B x D_in] tensor.
inline diff::Tensor stack_rows(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw DimensionError("cannot stack an empty batch");
    const std::size_t d = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) throw DimensionError("ragged feature rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return diff::Tensor({rows.size(), d}, std::move(data));
}

} // namespace clvid::video
