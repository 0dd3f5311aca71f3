#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "clvid/random.hpp"
#include "clvid/videodata/clip.hpp"

namespace clvid::video {

struct ProtocolConfig {
    std::size_t pool_size = 15;          // N tasks in the pool
    std::size_t classes_per_task = 2;    // c
    std::size_t tasks_per_problem = 5;   // T
    std::size_t experiments = 50;        // E
    double test_fraction = 0.3;          // held-out clips per training clip
    std::size_t clips_per_class = 130;
    std::uint64_t master_seed = 0;

    void validate(std::size_t available_classes) const {
        if (classes_per_task == 0) throw ProtocolError("classes per task must be positive");
        if (pool_size == 0) throw ProtocolError("task pool size must be positive");
        if (pool_size * classes_per_task > available_classes)
            throw ProtocolError("pool of " + std::to_string(pool_size) + " tasks x " + std::to_string(classes_per_task) +
                                " classes needs more than the " + std::to_string(available_classes) + " available classes");
        if (tasks_per_problem == 0) throw ProtocolError("tasks per problem must be positive");
        if (tasks_per_problem > pool_size)
            throw ProtocolError("tasks per problem (" + std::to_string(tasks_per_problem) + ") exceeds pool size (" +
                                std::to_string(pool_size) + ")");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ProtocolError("test fraction must lie in (0, 1)");
        if (clips_per_class < 2) throw ProtocolError("need at least two clips per class");
    }

    // Test clips per class. The held-out fraction is measured against the
    // training split: 130 clips at 0.3 give 100 train / 30 test.
    std::size_t test_count() const {
        const auto n = static_cast<double>(clips_per_class);
        auto t = static_cast<std::size_t>(std::llround(n * test_fraction / (1.0 + test_fraction)));
        return std::clamp<std::size_t>(t, 1, clips_per_class - 1);
    }

    friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

// A class and the ids of the clips available for it.
struct ClassMembers {
    std::size_t class_id = 0;
    std::vector<std::uint64_t> clip_ids;
};

struct ClassSplit {
    std::size_t class_id = 0;
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> test;
};

struct TaskSpec {
    std::size_t task_id = 0;
    std::vector<ClassSplit> classes;

    std::vector<std::size_t> class_ids() const {
        std::vector<std::size_t> out;
        for (const auto& c : classes) out.push_back(c.class_id);
        return out;
    }
};

struct TaskPool {
    std::vector<TaskSpec> tasks;
};

struct ContinualProblem {
    std::size_t experiment_id = 0;
    std::vector<std::size_t> task_ids;  // indices into the pool, in training order
    std::uint64_t seed = 0;

    friend bool operator==(const ContinualProblem&, const ContinualProblem&) = default;
};

inline constexpr std::uint64_t kPoolStream = 0x706F6F6C;     // "pool"
inline constexpr std::uint64_t kSplitStream = 0x73706C74;    // "splt"
inline constexpr std::uint64_t kProblemStream = 0x70726F62;  // "prob"

// Groups a random selection of N*c classes into N disjoint tasks of c classes
// and splits each class's clips into train/test. Deterministic in the seed.
inline TaskPool build_task_pool(const std::vector<ClassMembers>& classes, const ProtocolConfig& cfg) {
    cfg.validate(classes.size());
    const std::size_t test_n = cfg.test_count();

    std::vector<std::size_t> order(classes.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(child_seed(cfg.master_seed, kPoolStream));
    rng.shuffle(order.begin(), order.end());

    TaskPool pool;
    for (std::size_t t = 0; t < cfg.pool_size; ++t) {
        TaskSpec task;
        task.task_id = t;
        for (std::size_t j = 0; j < cfg.classes_per_task; ++j) {
            const auto& members = classes[order[t * cfg.classes_per_task + j]];
            if (members.clip_ids.size() < cfg.clips_per_class)
                throw ProtocolError("class " + std::to_string(members.class_id) + " has " +
                                    std::to_string(members.clip_ids.size()) + " clips, protocol needs " +
                                    std::to_string(cfg.clips_per_class));
            auto ids = members.clip_ids;
            std::sort(ids.begin(), ids.end());
            if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
                throw ProtocolError("class " + std::to_string(members.class_id) + " lists a clip id twice");
            Rng split_rng(child_seed(cfg.master_seed, kSplitStream, members.class_id));
            split_rng.shuffle(ids.begin(), ids.end());
            ids.resize(cfg.clips_per_class);
            ClassSplit split;
            split.class_id = members.class_id;
            split.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(test_n));
            split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(test_n), ids.end());
            std::sort(split.train.begin(), split.train.end());
            std::sort(split.test.begin(), split.test.end());
            task.classes.push_back(std::move(split));
        }
        pool.tasks.push_back(std::move(task));
    }
    return pool;
}

// E ordered T-subsets of the pool, each drawn without replacement from its
// own seed stream so experiment e is reproducible on its own.
inline std::vector<ContinualProblem> sample_problems(const TaskPool& pool, const ProtocolConfig& cfg) {
    if (cfg.tasks_per_problem > pool.tasks.size())
        throw ProtocolError("tasks per problem (" + std::to_string(cfg.tasks_per_problem) + ") exceeds pool size (" +
                            std::to_string(pool.tasks.size()) + ")");
    if (cfg.tasks_per_problem == 0) throw ProtocolError("tasks per problem must be positive");
    std::vector<ContinualProblem> out;
    out.reserve(cfg.experiments);
    for (std::size_t e = 0; e < cfg.experiments; ++e) {
        const auto seed = child_seed(cfg.master_seed, kProblemStream, e);
        Rng rng(seed);
        std::vector<std::size_t> ids(pool.tasks.size());
        std::iota(ids.begin(), ids.end(), 0);
        // Partial Fisher-Yates: first T slots become the ordered sample.
        for (std::size_t i = 0; i < cfg.tasks_per_problem; ++i) {
            const auto j = i + rng.below(ids.size() - i);
            std::swap(ids[i], ids[j]);
        }
        ids.resize(cfg.tasks_per_problem);
        out.push_back(ContinualProblem{e, std::move(ids), seed});
    }
    return out;
}

// Contiguous `window`-frame view starting uniformly in [0, p - window]. Clips
// shorter than the window are repeat-padded with their final frame and flagged.
inline Clip temporal_crop(const Clip& clip, std::size_t window, std::uint64_t seed) {
    if (window == 0) throw RangeError("crop window must be positive");
    const std::size_t p = clip.frames();
    std::vector<std::size_t> idx(window);
    if (p >= window) {
        Rng rng(seed);
        const std::size_t start = static_cast<std::size_t>(rng.below(p - window + 1));
        std::iota(idx.begin(), idx.end(), start);
        return clip.select_frames(idx);
    }
    for (std::size_t i = 0; i < window; ++i) idx[i] = std::min(i, p - 1);
    Clip out = clip.select_frames(idx);
    out.set_padded(true);
    return out;
}

} // namespace clvid::video
