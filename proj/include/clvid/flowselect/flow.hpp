#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "clvid/error.hpp"
#include "clvid/videodata/clip.hpp"

namespace clvid::flow {

// Single-channel image of doubles, row-major.
struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), data(h * w, fill) {}
    Plane(std::size_t h, std::size_t w, std::vector<double> d) : height(h), width(w), data(std::move(d)) {
        if (data.size() != h * w) throw DimensionError("plane data does not match its extents");
    }

    double& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
    double at(std::size_t y, std::size_t x) const { return data[y * width + x]; }

    double clamped(long y, long x) const {
        y = std::clamp<long>(y, 0, static_cast<long>(height) - 1);
        x = std::clamp<long>(x, 0, static_cast<long>(width) - 1);
        return data[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
    }

    double bilinear(double y, double x) const {
        y = std::clamp(y, 0.0, static_cast<double>(height - 1));
        x = std::clamp(x, 0.0, static_cast<double>(width - 1));
        const auto y0 = static_cast<long>(std::floor(y)), x0 = static_cast<long>(std::floor(x));
        const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
        return (1 - fy) * ((1 - fx) * clamped(y0, x0) + fx * clamped(y0, x0 + 1)) +
               fy * ((1 - fx) * clamped(y0 + 1, x0) + fx * clamped(y0 + 1, x0 + 1));
    }
};

// Dense motion field in pixels/frame: a(x) ~ b(x + (u, v)).
struct FlowField {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> u;
    std::vector<double> v;

    FlowField() = default;
    FlowField(std::size_t h, std::size_t w) : height(h), width(w), u(h * w, 0.0), v(h * w, 0.0) {}
};

struct FlowConfig {
    std::size_t levels = 3;
    std::size_t radius = 4;         // polynomial expansion neighbourhood
    std::size_t iterations = 3;     // displacement refinements per level
    double sigma = 1.1;             // applicability width of the expansion
    double window_sigma = 2.5;      // averaging of the displacement constraints

    void validate() const {
        if (levels < 1) throw ConfigError("flow pyramid needs at least one level");
        if (radius < 2) throw ConfigError("flow expansion radius must be at least 2");
        if (iterations < 1) throw ConfigError("flow iterations must be positive");
        if (!(sigma > 0.0) || !(window_sigma > 0.0)) throw ConfigError("flow smoothing widths must be positive");
    }

    friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

namespace detail {

inline constexpr std::size_t kMinFlowSide = 16;
inline constexpr std::size_t kMinLevelSide = 8;
inline constexpr double kSolveRegularizer = 1e-6;

using Mat6 = std::array<std::array<double, 6>, 6>;

inline Mat6 invert6(Mat6 a) {
    Mat6 inv{};
    for (int i = 0; i < 6; ++i) inv[i][i] = 1.0;
    for (int c = 0; c < 6; ++c) {
        int piv = c;
        for (int r = c + 1; r < 6; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(inv[c], inv[piv]);
        const double d = a[c][c];
        if (std::abs(d) < 1e-300) throw NumericError("singular polynomial expansion system");
        for (int k = 0; k < 6; ++k) {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for (int r = 0; r < 6; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            if (f == 0.0) continue;
            for (int k = 0; k < 6; ++k) {
                a[r][k] -= f * a[c][k];
                inv[r][k] -= f * inv[c][k];
            }
        }
    }
    return inv;
}

// Local quadratic model f(p + d) ~ d^T A d + b^T d + c at every pixel.
struct Expansion {
    Plane bx, by, axx, ayy, axy;  // axy is the full cross coefficient
};

inline Expansion expand(const Plane& img, std::size_t radius, double sigma) {
    const long r = static_cast<long>(radius);
    const std::size_t taps = static_cast<std::size_t>((2 * r + 1) * (2 * r + 1));
    std::vector<std::array<double, 6>> basis(taps);
    std::vector<double> weight(taps);
    Mat6 g{};
    std::size_t t = 0;
    for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx, ++t) {
            const double x = static_cast<double>(dx), y = static_cast<double>(dy);
            basis[t] = {1.0, x, y, x * x, y * y, x * y};
            weight[t] = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) g[i][j] += weight[t] * basis[t][i] * basis[t][j];
        }
    const Mat6 ginv = invert6(g);
    // Projection filters: coefficient k = sum_t filt[k][t] * f(p + offset_t).
    std::vector<std::array<double, 6>> filt(taps);
    for (t = 0; t < taps; ++t)
        for (int k = 0; k < 6; ++k) {
            double s = 0.0;
            for (int j = 0; j < 6; ++j) s += ginv[k][j] * basis[t][j];
            filt[t][k] = s * weight[t];
        }

    const std::size_t H = img.height, W = img.width;
    Expansion e{Plane(H, W), Plane(H, W), Plane(H, W), Plane(H, W), Plane(H, W)};
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            std::array<double, 6> c{};
            t = 0;
            for (long dy = -r; dy <= r; ++dy)
                for (long dx = -r; dx <= r; ++dx, ++t) {
                    const double f = img.clamped(static_cast<long>(y) + dy, static_cast<long>(x) + dx);
                    for (int k = 1; k < 6; ++k) c[k] += filt[t][k] * f;
                }
            e.bx.at(y, x) = c[1];
            e.by.at(y, x) = c[2];
            e.axx.at(y, x) = c[3];
            e.ayy.at(y, x) = c[4];
            e.axy.at(y, x) = c[5];
        }
    return e;
}

inline std::vector<double> gaussian_kernel(double sigma) {
    const long r = std::max<long>(1, static_cast<long>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double s = 0.0;
    for (long i = -r; i <= r; ++i) {
        k[static_cast<std::size_t>(i + r)] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        s += k[static_cast<std::size_t>(i + r)];
    }
    for (auto& v : k) v /= s;
    return k;
}

// Separable Gaussian blur with replicated borders.
inline Plane blur(const Plane& img, const std::vector<double>& k) {
    const long r = static_cast<long>(k.size() / 2);
    Plane tmp(img.height, img.width), out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            double s = 0.0;
            for (long i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * img.clamped(static_cast<long>(y), static_cast<long>(x) + i);
            tmp.at(y, x) = s;
        }
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            double s = 0.0;
            for (long i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.clamped(static_cast<long>(y) + i, static_cast<long>(x));
            out.at(y, x) = s;
        }
    return out;
}

inline Plane downsample(const Plane& img) {
    const Plane smooth = blur(img, gaussian_kernel(1.0));
    Plane out((img.height + 1) / 2, (img.width + 1) / 2);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x) out.at(y, x) = smooth.clamped(static_cast<long>(2 * y), static_cast<long>(2 * x));
    return out;
}

inline FlowField upsample(const FlowField& f, std::size_t h, std::size_t w) {
    const Plane pu(f.height, f.width, f.u), pv(f.height, f.width, f.v);
    FlowField out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double sy = static_cast<double>(y) / 2.0, sx = static_cast<double>(x) / 2.0;
            out.u[y * w + x] = 2.0 * pu.bilinear(sy, sx);
            out.v[y * w + x] = 2.0 * pv.bilinear(sy, sx);
        }
    return out;
}

// Refines `flow` in place using the displacement constraint between the two
// expansions, averaged over a Gaussian window.
inline void refine(const Expansion& e1, const Expansion& e2, FlowField& flow, const std::vector<double>& window) {
    const std::size_t H = flow.height, W = flow.width;
    Plane g11(H, W), g12(H, W), g22(H, W), h1(H, W), h2(H, W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t i = y * W + x;
            const double du = flow.u[i], dv = flow.v[i];
            const double sx = static_cast<double>(x) + du, sy = static_cast<double>(y) + dv;
            if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(W - 1) || sy > static_cast<double>(H - 1)) continue;
            const double a11 = 0.5 * (e1.axx.data[i] + e2.axx.bilinear(sy, sx));
            const double a22 = 0.5 * (e1.ayy.data[i] + e2.ayy.bilinear(sy, sx));
            const double a12 = 0.25 * (e1.axy.data[i] + e2.axy.bilinear(sy, sx));
            const double db1 = -0.5 * (e2.bx.bilinear(sy, sx) - e1.bx.data[i]) + a11 * du + a12 * dv;
            const double db2 = -0.5 * (e2.by.bilinear(sy, sx) - e1.by.data[i]) + a12 * du + a22 * dv;
            g11.data[i] = a11 * a11 + a12 * a12;
            g12.data[i] = a11 * a12 + a12 * a22;
            g22.data[i] = a12 * a12 + a22 * a22;
            h1.data[i] = a11 * db1 + a12 * db2;
            h2.data[i] = a12 * db1 + a22 * db2;
        }
    g11 = blur(g11, window);
    g12 = blur(g12, window);
    g22 = blur(g22, window);
    h1 = blur(h1, window);
    h2 = blur(h2, window);
    for (std::size_t i = 0; i < H * W; ++i) {
        const double a = g11.data[i] + kSolveRegularizer, b = g12.data[i], c = g22.data[i] + kSolveRegularizer;
        const double det = a * c - b * b;
        flow.u[i] = (c * h1.data[i] - b * h2.data[i]) / det;
        flow.v[i] = (a * h2.data[i] - b * h1.data[i]) / det;
    }
}

} // namespace detail

// Coarse-to-fine polynomial-expansion flow (Farneback): each frame is
// modelled by local quadratics, and the displacement that best aligns the
// two models is solved in a weighted least-squares window at every pixel.
inline FlowField estimate_flow(const Plane& a, const Plane& b, const FlowConfig& cfg) {
    cfg.validate();
    if (a.height != b.height || a.width != b.width)
        throw DimensionError("flow frames differ in shape: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                             " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
    if (a.height < detail::kMinFlowSide || a.width < detail::kMinFlowSide)
        throw DimensionError("flow needs frames of at least 16x16 pixels");

    std::vector<Plane> pa{a}, pb{b};
    while (pa.size() < cfg.levels && std::min(pa.back().height, pa.back().width) / 2 >= detail::kMinLevelSide) {
        pa.push_back(detail::downsample(pa.back()));
        pb.push_back(detail::downsample(pb.back()));
    }
    const auto window = detail::gaussian_kernel(cfg.window_sigma);
    FlowField flow(pa.back().height, pa.back().width);
    for (std::size_t l = pa.size(); l-- > 0;) {
        if (flow.height != pa[l].height || flow.width != pa[l].width) flow = detail::upsample(flow, pa[l].height, pa[l].width);
        const auto e1 = detail::expand(pa[l], cfg.radius, cfg.sigma);
        const auto e2 = detail::expand(pb[l], cfg.radius, cfg.sigma);
        for (std::size_t it = 0; it < cfg.iterations; ++it) detail::refine(e1, e2, flow, window);
    }
    for (std::size_t i = 0; i < flow.u.size(); ++i)
        if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i])) throw NumericError("non-finite optical flow");
    return flow;
}

// Luminance of one clip frame scaled to [0, 1].
inline Plane frame_plane(const video::Clip& clip, std::size_t f) {
    auto lum = video::luminance(clip, f);
    for (auto& v : lum) v /= 255.0;
    return Plane(clip.shape().height, clip.shape().width, std::move(lum));
}

// L2 norm of the flow between consecutive frames; p - 1 entries.
inline std::vector<double> transition_norms(const video::Clip& clip, const FlowConfig& cfg) {
    if (clip.frames() < 2) throw DimensionError("transition norms need at least two frames");
    std::vector<double> out;
    out.reserve(clip.frames() - 1);
    Plane prev = frame_plane(clip, 0);
    for (std::size_t f = 1; f < clip.frames(); ++f) {
        Plane next = frame_plane(clip, f);
        const auto fl = estimate_flow(prev, next, cfg);
        double s = 0.0;
        for (std::size_t i = 0; i < fl.u.size(); ++i) s += fl.u[i] * fl.u[i] + fl.v[i] * fl.v[i];
        out.push_back(std::sqrt(s));
        prev = std::move(next);
    }
    return out;
}

} // namespace clvid::flow
