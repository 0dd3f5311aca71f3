#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "clvid/flowselect/flow.hpp"

namespace clvid::flow {

// Frame j scores max(norm[j-1], norm[j]); missing neighbours count as 0, so a
// frame is informative when motion occurs on either side of it.
inline std::vector<double> frame_scores(std::span<const double> norms) {
    const std::size_t p = norms.size() + 1;
    std::vector<double> s(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        const double before = j > 0 ? norms[j - 1] : 0.0;
        const double after = j < norms.size() ? norms[j] : 0.0;
        s[j] = std::max(before, after);
    }
    return s;
}

// The k highest-scoring frames, returned in ascending (original) order.
// Equal scores prefer the earlier frame.
inline std::vector<std::size_t> select_top_frames(std::span<const double> norms, std::size_t k) {
    const std::size_t p = norms.size() + 1;
    if (k > p) throw BudgetError("frame budget " + std::to_string(k) + " exceeds clip length " + std::to_string(p));
    if (k < 2) throw BudgetError("frame budget must be at least 2");
    const auto scores = frame_scores(norms);
    std::vector<std::size_t> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Information-driven downsampling: keeps the k frames around the largest
// optical-flow transitions.
inline std::vector<std::size_t> idd_select(const video::Clip& clip, std::size_t k, const FlowConfig& cfg) {
    if (k > clip.frames())
        throw BudgetError("frame budget " + std::to_string(k) + " exceeds clip length " + std::to_string(clip.frames()));
    if (k < 2) throw BudgetError("frame budget must be at least 2");
    if (k == clip.frames()) {
        std::vector<std::size_t> all(k);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    const auto norms = transition_norms(clip, cfg);
    return select_top_frames(norms, k);
}

} // namespace clvid::flow
