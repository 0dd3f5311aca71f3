#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "clvid/diffcore/model.hpp"
#include "clvid/videodata/features.hpp"

namespace clvid::eval {

// Mean logits over the consecutive non-overlapping windows of a clip. A
// trailing remainder shorter than the window is dropped; clips shorter than
// one window are repeat-padded into a single window.
inline std::vector<double> predict_clip(const diff::Mlp& model, const video::Clip& clip, const video::FeatureConfig& features) {
    const std::size_t w = features.window;
    std::vector<std::vector<double>> rows;
    if (clip.frames() < w) {
        std::vector<std::size_t> idx(w);
        for (std::size_t i = 0; i < w; ++i) idx[i] = std::min(i, clip.frames() - 1);
        rows.push_back(video::clip_features(clip.select_frames(idx), features));
    } else {
        for (std::size_t start = 0; start + w <= clip.frames(); start += w) {
            std::vector<std::size_t> idx(w);
            std::iota(idx.begin(), idx.end(), start);
            rows.push_back(video::clip_features(clip.select_frames(idx), features));
        }
    }
    const auto logits = diff::forward_mlp(model, video::stack_rows(rows)).value();
    const std::size_t k = logits.dim(1);
    std::vector<double> mean(k, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < k; ++j) mean[j] += logits.at(r, j);
    for (auto& v : mean) v /= static_cast<double>(rows.size());
    return mean;
}

// Test-time predictions for one task of a problem.
struct TaskPredictions {
    std::vector<std::size_t> class_indices;       // the task's problem-local classes
    std::vector<std::vector<double>> logits;      // one row per test clip
    std::vector<std::size_t> labels;              // problem-local labels
};

struct Accuracy {
    std::vector<double> per_task;
    double mean = 0.0;
};

// Argmax over `candidates` (ties resolve to the first candidate listed).
inline std::size_t masked_argmax(std::span<const double> logits, std::span<const std::size_t> candidates) {
    std::size_t best = candidates.front();
    for (auto c : candidates)
        if (logits[c] > logits[best]) best = c;
    return best;
}

// Candidate classes under task-incremental evaluation: the task's own classes.
inline std::vector<std::size_t> til_candidates(const TaskPredictions& t) { return t.class_indices; }

// Candidate classes under class-incremental evaluation: every problem class.
inline std::vector<std::size_t> cil_candidates(std::size_t num_classes) {
    std::vector<std::size_t> all(num_classes);
    std::iota(all.begin(), all.end(), 0);
    return all;
}

namespace detail {

inline Accuracy accuracy_with(std::span<const TaskPredictions> tasks,
                              const std::function<std::vector<std::size_t>(const TaskPredictions&)>& candidates) {
    Accuracy acc;
    for (const auto& t : tasks) {
        const auto cand = candidates(t);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < t.labels.size(); ++i) correct += masked_argmax(t.logits[i], cand) == t.labels[i];
        acc.per_task.push_back(t.labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(t.labels.size()));
    }
    acc.mean = acc.per_task.empty() ? 0.0
                                    : std::accumulate(acc.per_task.begin(), acc.per_task.end(), 0.0) /
                                          static_cast<double>(acc.per_task.size());
    return acc;
}

} // namespace detail

// Task-incremental accuracy: out-of-task logits are excluded from the argmax.
inline Accuracy accuracy_til(std::span<const TaskPredictions> tasks) {
    return detail::accuracy_with(tasks, [](const TaskPredictions& t) { return til_candidates(t); });
}

// Class-incremental accuracy: argmax over all problem classes.
inline Accuracy accuracy_cil(std::span<const TaskPredictions> tasks) {
    return detail::accuracy_with(tasks, [](const TaskPredictions& t) {
        return cil_candidates(t.logits.empty() ? 0 : t.logits.front().size());
    });
}

} // namespace clvid::eval
