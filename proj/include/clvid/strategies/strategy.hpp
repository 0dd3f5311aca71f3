#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "clvid/random.hpp"
#include "clvid/strategies/losses.hpp"

namespace clvid::strategy {

enum class Kind { finetune, er, der, derpp, ewc, lwf, agem };

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::finetune: return "finetune";
        case Kind::er: return "er";
        case Kind::der: return "der";
        case Kind::derpp: return "derpp";
        case Kind::ewc: return "ewc";
        case Kind::lwf: return "lwf";
        case Kind::agem: return "agem";
    }
    return "?";
}

inline Kind parse_kind(const std::string& s) {
    for (auto k : {Kind::finetune, Kind::er, Kind::der, Kind::derpp, Kind::ewc, Kind::lwf, Kind::agem})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown strategy kind '" + s + "' (expected finetune, er, der, derpp, ewc, lwf or agem)");
}

inline bool is_rehearsal(Kind k) { return k == Kind::er || k == Kind::der || k == Kind::derpp || k == Kind::agem; }

// Defaults follow the usual settings of each method's reference
// implementation; lambda is scaled down for the small MLP backbone.
struct StrategyConfig {
    Kind kind = Kind::finetune;
    double alpha = 0.5;            // DER / DER++ logit matching
    double beta = 0.5;             // DER++ replay cross-entropy
    double lambda = 400.0;         // EWC
    double temperature = 2.0;      // LwF
    double distill_weight = 1.0;   // LwF
    std::size_t replay_batch = 16;
    std::size_t fisher_samples = 200;

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || lambda < 0.0 || distill_weight < 0.0)
            throw ConfigError("strategy weights must be nonnegative");
        if (!(temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
        if (replay_batch == 0) throw ConfigError("replay batch size must be positive");
        if (fisher_samples == 0) throw ConfigError("Fisher sample cap must be positive");
    }

    friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

struct StepResult {
    double loss = 0.0;
    Tensor logits;   // current-batch logits before the update
};

// Seeds for the replay draws of one training step.
inline std::uint64_t replay_seed(std::uint64_t step_seed, std::uint64_t draw) { return child_seed(step_seed, 0x72706C79, draw); }

class Strategy {
public:
    explicit Strategy(StrategyConfig cfg, video::FeatureConfig features) : cfg_(cfg), features_(features) {
        cfg_.validate();
    }
    virtual ~Strategy() = default;

    Kind kind() const noexcept { return cfg_.kind; }
    const StrategyConfig& config() const noexcept { return cfg_; }
    bool uses_buffer() const noexcept { return is_rehearsal(cfg_.kind); }

    // Training loss for one step; replay draws are keyed by `step_seed`.
    virtual Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer* buffer,
                     std::uint64_t step_seed) const = 0;

    // Zeroes, then fills the model's gradients for one step.
    virtual StepResult compute_gradients(Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer* buffer,
                                         std::uint64_t step_seed) {
        model.params().zero_grad();
        const Var l = loss(model, batch, buffer, step_seed);
        diff::backward(l);
        return StepResult{l.item(), current_logits(model, batch)};
    }

    // Task-boundary hook; `task_data` holds the finished task's training set.
    virtual void end_of_task(Mlp& /*model*/, const Batch& /*task_data*/) {}

protected:
    std::optional<ReplayBatch> draw(const rehearsal::ReplayBuffer* buffer, std::uint64_t step_seed, std::uint64_t which) const {
        if (!buffer || buffer->empty()) return std::nullopt;
        const auto items = buffer->sample_batch(cfg_.replay_batch, replay_seed(step_seed, which));
        return make_replay_batch(items, features_);
    }

    static Tensor current_logits(const Mlp& model, const Batch& batch) {
        return diff::forward_mlp(model, batch.features).value();
    }

    StrategyConfig cfg_;
    video::FeatureConfig features_;
};

class Finetune final : public Strategy {
public:
    using Strategy::Strategy;
    Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer*, std::uint64_t) const override {
        return loss_finetune(model, batch);
    }
};

class ExperienceReplay final : public Strategy {
public:
    using Strategy::Strategy;
    Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer* buffer, std::uint64_t seed) const override {
        const auto replay = draw(buffer, seed, 1);
        return loss_er(model, batch, replay ? &*replay : nullptr);
    }
};

// Dark experience replay; with kind == derpp the labelled replay term is added.
class DarkExperienceReplay final : public Strategy {
public:
    using Strategy::Strategy;
    Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer* buffer, std::uint64_t seed) const override {
        const auto replay = draw(buffer, seed, 1);
        if (cfg_.kind != Kind::derpp) return loss_der(model, batch, replay ? &*replay : nullptr, cfg_.alpha);
        const auto second = draw(buffer, seed, 2);
        return loss_derpp(model, batch, replay ? &*replay : nullptr, second ? &*second : nullptr, cfg_.alpha, cfg_.beta);
    }
};

class ElasticWeightConsolidation final : public Strategy {
public:
    using Strategy::Strategy;
    Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer*, std::uint64_t) const override {
        return loss_ewc(model, batch, snapshots_, cfg_.lambda);
    }
    void end_of_task(Mlp& model, const Batch& task_data) override {
        TaskSnapshot snap;
        snap.fisher = estimate_fisher(model, task_data, cfg_.fisher_samples);
        snap.anchor = model.params().values();
        snapshots_.push_back(std::move(snap));
    }
    const std::vector<TaskSnapshot>& snapshots() const noexcept { return snapshots_; }

private:
    std::vector<TaskSnapshot> snapshots_;
};

class LearningWithoutForgetting final : public Strategy {
public:
    using Strategy::Strategy;
    Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer*, std::uint64_t) const override {
        return loss_lwf(model, batch, teacher_ ? &*teacher_ : nullptr, cfg_.temperature, cfg_.distill_weight);
    }
    void end_of_task(Mlp& model, const Batch&) override { teacher_ = model.clone(); }
    const std::optional<Mlp>& teacher() const noexcept { return teacher_; }

private:
    std::optional<Mlp> teacher_;
};

// Averaged GEM: the current-batch gradient is projected against the gradient
// of one replay batch per step.
class AveragedGem final : public Strategy {
public:
    using Strategy::Strategy;
    Var loss(const Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer*, std::uint64_t) const override {
        return loss_finetune(model, batch);
    }
    StepResult compute_gradients(Mlp& model, const Batch& batch, const rehearsal::ReplayBuffer* buffer,
                                 std::uint64_t seed) override {
        const auto replay = draw(buffer, seed, 1);
        std::vector<double> g_ref;
        if (replay) {
            model.params().zero_grad();
            diff::backward(diff::cross_entropy(diff::forward_mlp(model, replay->features), replay->labels));
            g_ref = model.params().flatten_grad();
        }
        model.params().zero_grad();
        const Var l = loss_finetune(model, batch);
        diff::backward(l);
        if (replay) model.params().set_flat_grad(agem_project(model.params().flatten_grad(), g_ref));
        return StepResult{l.item(), current_logits(model, batch)};
    }
};

inline std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg, const video::FeatureConfig& features) {
    switch (cfg.kind) {
        case Kind::finetune: return std::make_unique<Finetune>(cfg, features);
        case Kind::er: return std::make_unique<ExperienceReplay>(cfg, features);
        case Kind::der:
        case Kind::derpp: return std::make_unique<DarkExperienceReplay>(cfg, features);
        case Kind::ewc: return std::make_unique<ElasticWeightConsolidation>(cfg, features);
        case Kind::lwf: return std::make_unique<LearningWithoutForgetting>(cfg, features);
        case Kind::agem: return std::make_unique<AveragedGem>(cfg, features);
    }
    throw ConfigError("unhandled strategy kind");
}

} // namespace clvid::strategy
