#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "clvid/diffcore/optim.hpp"
#include "clvid/evalproto/metrics.hpp"
#include "clvid/flowselect/idd.hpp"
#include "clvid/rehearsal/buffer.hpp"
#include "clvid/strategies/strategy.hpp"
#include "clvid/videodata/protocol.hpp"

namespace clvid::eval {

struct TrainingConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    diff::OptimizerKind optimizer = diff::OptimizerKind::rmsprop;
    double lr = 1e-3;
    double rho = 0.99;
    double eps = 1e-8;
    std::size_t hidden = 64;
    video::FeatureConfig features;
    std::size_t buffer_capacity = 200;
    bool per_task_eval = false;

    void validate() const {
        if (epochs == 0) throw ConfigError("epochs must be positive");
        if (batch_size == 0) throw ConfigError("batch size must be positive");
        if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
        if (features.window == 0 || features.grid == 0) throw ConfigError("feature window and grid must be positive");
        if (hidden == 0) throw ConfigError("hidden width must be positive");
    }

    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

// Read-only clip lookup by source id.
class ClipStore {
public:
    void add(video::Clip clip) {
        const auto id = clip.source_id();
        if (!clips_.emplace(id, std::move(clip)).second) throw ProtocolError("duplicate clip id " + std::to_string(id));
    }
    const video::Clip& get(std::uint64_t id) const {
        auto it = clips_.find(id);
        if (it == clips_.end()) throw ProtocolError("unknown clip id " + std::to_string(id));
        return it->second;
    }
    std::size_t size() const noexcept { return clips_.size(); }

    // Class membership lists, ordered by class id.
    std::vector<video::ClassMembers> classes() const {
        std::map<std::size_t, std::vector<std::uint64_t>> by_class;
        for (const auto& [id, c] : clips_) by_class[c.label()].push_back(id);
        std::vector<video::ClassMembers> out;
        for (auto& [cls, ids] : by_class) {
            std::sort(ids.begin(), ids.end());
            out.push_back({cls, std::move(ids)});
        }
        return out;
    }

private:
    std::unordered_map<std::uint64_t, video::Clip> clips_;
};

struct EvalReport {
    std::size_t experiment_id = 0;
    std::vector<double> cil_per_task;
    std::vector<double> til_per_task;
    double cil_mean = 0.0;
    double til_mean = 0.0;
    std::uint64_t buffer_items = 0;
    std::uint64_t buffer_bytes = 0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct RunLog {
    std::vector<double> step_losses;
    std::vector<double> task_seconds;
    std::uint64_t problem_seed = 0;
    std::uint64_t run_seed = 0;
    std::string config_hash;
    // C-IL accuracy of every task seen so far, recorded after each task when
    // per-task evaluation is enabled.
    std::vector<std::vector<double>> cil_after_task;
};

struct ExperimentResult {
    EvalReport report;
    RunLog log;
    diff::Mlp model;
    std::optional<rehearsal::ReplayBuffer> buffer;
};

// Training/test views of one problem with problem-local labels: task at
// position t owns labels [t*c, (t+1)*c).
struct ProblemData {
    std::size_t num_classes = 0;
    std::vector<std::vector<std::size_t>> task_classes;  // local indices per task
    std::vector<std::vector<std::pair<std::uint64_t, std::size_t>>> train;  // (clip id, label)
    std::vector<std::vector<std::pair<std::uint64_t, std::size_t>>> test;
};

inline ProblemData problem_data(const video::ContinualProblem& problem, const video::TaskPool& pool) {
    ProblemData d;
    std::size_t next = 0;
    for (auto tid : problem.task_ids) {
        if (tid >= pool.tasks.size()) throw ProtocolError("problem references task " + std::to_string(tid) + " outside the pool");
        const auto& task = pool.tasks[tid];
        std::vector<std::size_t> locals;
        std::vector<std::pair<std::uint64_t, std::size_t>> tr, te;
        for (const auto& cls : task.classes) {
            const std::size_t label = next++;
            locals.push_back(label);
            for (auto id : cls.train) tr.emplace_back(id, label);
            for (auto id : cls.test) te.emplace_back(id, label);
        }
        d.task_classes.push_back(std::move(locals));
        d.train.push_back(std::move(tr));
        d.test.push_back(std::move(te));
    }
    d.num_classes = next;
    return d;
}

inline std::vector<TaskPredictions> predict_tasks(const diff::Mlp& model, const ProblemData& data, const ClipStore& store,
                                                  const video::FeatureConfig& features, std::size_t task_count) {
    std::vector<TaskPredictions> out;
    for (std::size_t t = 0; t < task_count; ++t) {
        TaskPredictions p;
        p.class_indices = data.task_classes[t];
        for (const auto& [id, label] : data.test[t]) {
            p.logits.push_back(predict_clip(model, store.get(id), features));
            p.labels.push_back(label);
        }
        out.push_back(std::move(p));
    }
    return out;
}

namespace detail {

inline constexpr std::uint64_t kModelStream = 0x6D6F64;
inline constexpr std::uint64_t kBufferStream = 0x627566;
inline constexpr std::uint64_t kShuffleStream = 0x736866;
inline constexpr std::uint64_t kCropStream = 0x637270;
inline constexpr std::uint64_t kStepStream = 0x737470;
inline constexpr std::uint64_t kFisherStream = 0x667368;

} // namespace detail

// Trains one strategy through the problem's task sequence and evaluates
// C-IL/T-IL once all tasks are done. Deterministic in (problem, run_seed).
inline ExperimentResult run_experiment(const video::ContinualProblem& problem, const video::TaskPool& pool,
                                       const ClipStore& store, const strategy::StrategyConfig& strategy_cfg,
                                       const rehearsal::GateConfig& gate, const TrainingConfig& training,
                                       std::uint64_t run_seed) {
    training.validate();
    strategy_cfg.validate();
    gate.validate();
    const ProblemData data = problem_data(problem, pool);
    const auto& fc = training.features;

    std::size_t channels = 0;
    for (const auto& task : data.train)
        if (!task.empty()) {
            channels = store.get(task.front().first).shape().channels;
            break;
        }
    if (channels == 0) throw ProtocolError("problem has no training clips");

    diff::MlpSpec spec{fc.input_dim(channels), {training.hidden}, data.num_classes, diff::Activation::relu};
    diff::Mlp model(spec, child_seed(run_seed, detail::kModelStream));
    auto opt = diff::make_optimizer(training.optimizer, training.lr, training.rho, training.eps);
    auto strategy = strategy::make_strategy(strategy_cfg, fc);

    ExperimentResult result;
    result.log.problem_seed = problem.seed;
    result.log.run_seed = run_seed;

    std::optional<rehearsal::ReplayBuffer> buffer;
    std::unordered_map<std::uint64_t, std::vector<double>> norm_cache;
    if (strategy->uses_buffer()) {
        rehearsal::GateConfig g = gate;
        if (g.idd_enabled) g.frame_budget = fc.window;
        buffer.emplace(training.buffer_capacity, fc.window, data.num_classes, g, child_seed(run_seed, detail::kBufferStream));
        if (g.idd_enabled) {
            buffer->set_frame_selector([&norm_cache, flow_cfg = g.flow](const video::Clip& clip, std::size_t k) {
                if (k == clip.frames()) return flow::idd_select(clip, k, flow_cfg);
                auto it = norm_cache.find(clip.source_id());
                if (it == norm_cache.end()) it = norm_cache.emplace(clip.source_id(), flow::transition_norms(clip, flow_cfg)).first;
                return flow::select_top_frames(it->second, k);
            });
        }
    }

    std::uint64_t global_step = 0;
    for (std::size_t t = 0; t < data.train.size(); ++t) {
        const auto started = std::chrono::steady_clock::now();
        auto order = data.train[t];
        for (std::size_t epoch = 0; epoch < training.epochs; ++epoch) {
            Rng shuffler(child_seed(run_seed, detail::kShuffleStream, t, epoch));
            shuffler.shuffle(order.begin(), order.end());
            for (std::size_t start = 0; start < order.size(); start += training.batch_size, ++global_step) {
                const std::size_t end = std::min(order.size(), start + training.batch_size);
                std::vector<video::Clip> crops;
                std::vector<std::vector<double>> rows;
                strategy::Batch batch;
                for (std::size_t i = start; i < end; ++i) {
                    const auto& src = store.get(order[i].first);
                    crops.push_back(video::temporal_crop(src, fc.window, child_seed(run_seed, detail::kCropStream, global_step, i)));
                    rows.push_back(video::clip_features(crops.back(), fc));
                    batch.labels.push_back(order[i].second);
                }
                batch.features = video::stack_rows(rows);

                const std::uint64_t step_seed = child_seed(run_seed, detail::kStepStream, global_step);
                strategy::StepResult step;
                try {
                    step = strategy->compute_gradients(model, batch, buffer ? &*buffer : nullptr, step_seed);
                    if (!std::isfinite(step.loss)) throw NumericError("non-finite loss");
                    diff::step(model.params(), opt);
                } catch (const NumericError& e) {
                    throw DivergenceError("training diverged at step " + std::to_string(global_step) + " (task " +
                                          std::to_string(t) + ", strategy " + strategy::to_string(strategy_cfg.kind) +
                                          "): " + e.what());
                }
                result.log.step_losses.push_back(step.loss);

                if (buffer) {
                    const std::size_t k = data.num_classes;
                    for (std::size_t i = start; i < end; ++i) {
                        const std::size_t r = i - start;
                        std::span<const double> row(step.logits.data().data() + r * k, k);
                        const auto& offered = gate.idd_enabled ? store.get(order[i].first) : crops[r];
                        buffer->offer(offered, order[i].second, row, t);
                    }
                }
            }
        }

        // Deterministic single-crop view of the finished task for boundary hooks.
        std::vector<std::vector<double>> rows;
        strategy::Batch task_data;
        for (std::size_t i = 0; i < data.train[t].size(); ++i) {
            const auto& [id, label] = data.train[t][i];
            rows.push_back(video::clip_features(
                video::temporal_crop(store.get(id), fc.window, child_seed(run_seed, detail::kFisherStream, t, i)), fc));
            task_data.labels.push_back(label);
        }
        task_data.features = video::stack_rows(rows);
        strategy->end_of_task(model, task_data);

        if (training.per_task_eval)
            result.log.cil_after_task.push_back(accuracy_cil(predict_tasks(model, data, store, fc, t + 1)).per_task);
        result.log.task_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    }

    const auto preds = predict_tasks(model, data, store, fc, data.train.size());
    const auto cil = accuracy_cil(preds);
    const auto til = accuracy_til(preds);
    auto& rep = result.report;
    rep.experiment_id = problem.experiment_id;
    rep.cil_per_task = cil.per_task;
    rep.til_per_task = til.per_task;
    rep.cil_mean = cil.mean;
    rep.til_mean = til.mean;
    if (buffer) {
        const auto mem = buffer->memory();
        rep.buffer_items = mem.items;
        rep.buffer_bytes = mem.total();
    }
    result.model = std::move(model);
    if (buffer) {
        buffer->reset_frame_selector();  // the memo lives on this stack frame
        result.buffer = std::move(buffer);
    }
    return result;
}

} // namespace clvid::eval
