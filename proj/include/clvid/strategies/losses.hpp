#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clvid/diffcore/autograd.hpp"
#include "clvid/diffcore/model.hpp"
#include "clvid/error.hpp"
#include "clvid/rehearsal/buffer.hpp"
#include "clvid/videodata/features.hpp"

namespace clvid::strategy {

using diff::Mlp;
using diff::Tensor;
using diff::Var;

// Current-task minibatch: feature rows and problem-local labels.
struct Batch {
    Tensor features;
    std::vector<std::size_t> labels;
};

// Rehearsal minibatch with the logits recorded when each item was buffered.
struct ReplayBatch {
    Tensor features;
    std::vector<std::size_t> labels;
    Tensor logits;
};

inline ReplayBatch make_replay_batch(std::span<const rehearsal::BufferItem* const> items,
                                     const video::FeatureConfig& features) {
    if (items.empty()) throw EmptyBufferError("empty replay batch");
    std::vector<std::vector<double>> rows, logits;
    ReplayBatch rb;
    for (const auto* it : items) {
        rows.push_back(video::clip_features(it->clip, features));
        logits.push_back(it->logits);
        rb.labels.push_back(it->label);
    }
    rb.features = video::stack_rows(rows);
    rb.logits = video::stack_rows(logits);
    return rb;
}

// Anchor for the quadratic consolidation penalty.
struct TaskSnapshot {
    std::vector<Tensor> anchor;   // parameter values at the end of the task
    std::vector<Tensor> fisher;   // diagonal Fisher, elementwise >= 0
};

inline Var loss_finetune(const Mlp& model, const Batch& batch) {
    return diff::cross_entropy(diff::forward_mlp(model, batch.features), batch.labels);
}

// CE on the current batch plus CE on the replay batch (if any).
inline Var loss_er(const Mlp& model, const Batch& batch, const ReplayBatch* replay) {
    Var loss = loss_finetune(model, batch);
    if (!replay) return loss;
    return diff::add(loss, diff::cross_entropy(diff::forward_mlp(model, replay->features), replay->labels));
}

inline void check_replay_logits(const Mlp& model, const ReplayBatch& replay) {
    if (replay.logits.rank() != 2 || replay.logits.dim(1) != model.num_classes())
        throw ConfigError("stored logits have width " + std::to_string(replay.logits.rank() == 2 ? replay.logits.dim(1) : 0) +
                          ", model has " + std::to_string(model.num_classes()) + " classes");
}

// CE(current) + alpha * MSE(logits on replayed clips, stored logits).
inline Var loss_der(const Mlp& model, const Batch& batch, const ReplayBatch* replay, double alpha) {
    Var loss = loss_finetune(model, batch);
    if (!replay) return loss;
    check_replay_logits(model, *replay);
    const Var match = diff::mse(diff::forward_mlp(model, replay->features), Var::constant(replay->logits));
    return diff::add(loss, diff::scale(match, alpha));
}

// DER plus beta * CE on a second replay batch against its stored labels.
inline Var loss_derpp(const Mlp& model, const Batch& batch, const ReplayBatch* replay, const ReplayBatch* replay_labels,
                      double alpha, double beta) {
    Var loss = loss_der(model, batch, replay, alpha);
    if (!replay_labels) return loss;
    check_replay_logits(model, *replay_labels);
    const Var ce = diff::cross_entropy(diff::forward_mlp(model, replay_labels->features), replay_labels->labels);
    return diff::add(loss, diff::scale(ce, beta));
}

// sum over snapshots and parameters of F * (theta - anchor)^2, without lambda/2.
inline Var consolidation_penalty(const Mlp& model, std::span<const TaskSnapshot> snapshots) {
    const auto& p = model.params();
    Var total = Var::constant(Tensor::scalar(0.0));
    bool any = false;
    for (const auto& snap : snapshots) {
        if (snap.anchor.size() != p.count() || snap.fisher.size() != p.count())
            throw ConfigError("EWC snapshot does not match the model's parameter list");
        for (std::size_t i = 0; i < p.count(); ++i) {
            const Var term = diff::weighted_sq_distance(p[i], snap.anchor[i], snap.fisher[i]);
            total = any ? diff::add(total, term) : term;
            any = true;
        }
    }
    return total;
}

// CE(current) + (lambda / 2) * sum_snapshots sum_i F_i (theta_i - anchor_i)^2
inline Var loss_ewc(const Mlp& model, const Batch& batch, std::span<const TaskSnapshot> snapshots, double lambda) {
    Var loss = loss_finetune(model, batch);
    if (snapshots.empty()) return loss;
    return diff::add(loss, diff::scale(consolidation_penalty(model, snapshots), 0.5 * lambda));
}

// CE(current) + w * tau^2 * KL(softmax(teacher / tau) || softmax(student / tau)).
inline Var loss_lwf(const Mlp& model, const Batch& batch, const Mlp* teacher, double temperature, double weight) {
    const Var logits = diff::forward_mlp(model, batch.features);
    Var loss = diff::cross_entropy(logits, batch.labels);
    if (!teacher) return loss;
    const Tensor target = diff::forward_mlp(*teacher, batch.features).value();
    const Var kl = diff::distillation_kl(logits, target, temperature);
    return diff::add(loss, diff::scale(kl, weight * temperature * temperature));
}

// A-GEM: when g conflicts with the reference gradient, drop the conflicting
// component so the update no longer increases the replay loss to first order.
inline std::vector<double> agem_project(std::span<const double> g, std::span<const double> g_ref) {
    if (g.size() != g_ref.size())
        throw DimensionError("gradient dimension " + std::to_string(g.size()) + " differs from reference " +
                             std::to_string(g_ref.size()));
    double dot = 0.0, ref_sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        dot += g[i] * g_ref[i];
        ref_sq += g_ref[i] * g_ref[i];
    }
    std::vector<double> out(g.begin(), g.end());
    if (dot >= 0.0 || ref_sq == 0.0) return out;
    const double f = dot / ref_sq;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= f * g_ref[i];
    return out;
}

// Empirical diagonal Fisher: mean over at most `sample_cap` samples of the
// squared gradient of log softmax(logits)[y].
inline std::vector<Tensor> estimate_fisher(Mlp& model, const Batch& data, std::size_t sample_cap) {
    const std::size_t n = std::min(sample_cap, data.labels.size());
    if (n == 0) throw EstimationError("Fisher estimation needs at least one sample");
    auto& p = model.params();
    std::vector<Tensor> fisher;
    for (std::size_t i = 0; i < p.count(); ++i) fisher.emplace_back(p[i].shape(), 0.0);
    const std::size_t d = data.features.dim(1);
    for (std::size_t s = 0; s < n; ++s) {
        Tensor row({1, d}, std::vector<double>(data.features.data().begin() + s * d, data.features.data().begin() + (s + 1) * d));
        const std::vector<std::size_t> label{data.labels[s]};
        p.zero_grad();
        // d(-log p_y) has the same square as d(log p_y).
        diff::backward(diff::cross_entropy(diff::forward_mlp(model, row), label));
        for (std::size_t i = 0; i < p.count(); ++i) {
            auto f = fisher[i].data();
            const auto g = p[i].grad().data();
            for (std::size_t j = 0; j < f.size(); ++j) f[j] += g[j] * g[j];
        }
    }
    p.zero_grad();
    for (auto& f : fisher)
        for (auto& v : f.data()) v /= static_cast<double>(n);
    return fisher;
}

} // namespace clvid::strategy
