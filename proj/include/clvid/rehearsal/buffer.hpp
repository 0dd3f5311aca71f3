#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clvid/diffcore/autograd.hpp"
#include "clvid/flowselect/idd.hpp"
#include "clvid/random.hpp"
#include "clvid/videodata/clip.hpp"

namespace clvid::rehearsal {

struct GateConfig {
    bool cdr_enabled = false;
    double delta = 0.7;              // admit only when p(y | x) > delta
    bool idd_enabled = false;
    std::size_t frame_budget = 16;   // k frames kept by IDD
    flow::FlowConfig flow;

    void validate() const {
        if (cdr_enabled && !(delta > 0.0 && delta < 1.0)) throw ConfigError("CDR threshold must lie in (0, 1)");
        if (idd_enabled) {
            if (frame_budget < 2) throw ConfigError("IDD frame budget must be at least 2");
            flow.validate();
        }
    }

    friend bool operator==(const GateConfig&, const GateConfig&) = default;
};

struct BufferItem {
    video::Clip clip;                    // stored frame window
    std::size_t label = 0;
    std::vector<double> logits;          // model output when the item was offered
    std::size_t task_id = 0;
    double confidence = 0.0;             // softmax(logits)[label]
    std::uint64_t stream_index = 0;      // position in the offer stream
    std::vector<std::size_t> frame_indices;  // source frames kept by IDD (empty otherwise)
};

// Bytes charged per stored item. Pixels are accounted as 32-bit floats, the
// layout a training pipeline holds after normalisation; logits as doubles.
inline constexpr std::uint64_t kPixelScalarBytes = 4;
inline constexpr std::uint64_t kLogitBytes = 8;
// label, task id, confidence, stream index: 8 bytes each.
inline constexpr std::uint64_t kItemMetadataBytes = 32;

struct MemoryFootprint {
    std::uint64_t items = 0;
    std::uint64_t clip_bytes = 0;
    std::uint64_t logit_bytes = 0;
    std::uint64_t metadata_bytes = 0;

    std::uint64_t total() const noexcept { return clip_bytes + logit_bytes + metadata_bytes; }
};

inline MemoryFootprint memory_footprint(std::uint64_t items, const video::ClipShape& stored, std::uint64_t num_classes) {
    MemoryFootprint m;
    m.items = items;
    m.clip_bytes = items * static_cast<std::uint64_t>(stored.total_bytes()) * kPixelScalarBytes;
    m.logit_bytes = items * num_classes * kLogitBytes;
    m.metadata_bytes = items * kItemMetadataBytes;
    return m;
}

// Picks which source frames to keep for a clip; defaults to IDD over the
// clip's optical flow. Replaceable so callers can memoise flow per clip.
using FrameSelector = std::function<std::vector<std::size_t>(const video::Clip&, std::size_t)>;

enum class OfferOutcome { stored, replaced, discarded, rejected_by_gate };

// Fixed-capacity rehearsal memory filled by reservoir sampling (Algorithm R)
// over the offers that pass the confidence gate.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t window, std::size_t num_classes, GateConfig gate, std::uint64_t seed)
        : capacity_(capacity), window_(window), num_classes_(num_classes), gate_(std::move(gate)), rng_(seed) {
        gate_.validate();
        if (window_ == 0) throw ConfigError("buffer window must be positive");
        if (num_classes_ == 0) throw ConfigError("buffer needs a positive class count");
        if (gate_.idd_enabled && gate_.frame_budget != window_)
            throw ConfigError("IDD frame budget " + std::to_string(gate_.frame_budget) + " differs from stored window " +
                              std::to_string(window_));
        reset_frame_selector();
    }

    void set_frame_selector(FrameSelector s) { selector_ = std::move(s); }
    void reset_frame_selector() {
        selector_ = [cfg = gate_.flow](const video::Clip& c, std::size_t k) { return flow::idd_select(c, k, cfg); };
    }

    // With IDD enabled `clip` is the full source clip; otherwise it must
    // already be the `window`-frame training view.
    OfferOutcome offer(const video::Clip& clip, std::size_t label, std::span<const double> logits, std::size_t task_id) {
        if (logits.size() != num_classes_)
            throw ConfigError("offered logits have length " + std::to_string(logits.size()) + ", expected " +
                              std::to_string(num_classes_));
        if (label >= num_classes_) throw IndexError("offered label out of range");
        const std::uint64_t stream_index = offered_++;
        const double conf = confidence(logits, label);
        if (gate_.cdr_enabled && !(conf > gate_.delta)) {
            ++rejected_;
            return OfferOutcome::rejected_by_gate;
        }
        ++admitted_;
        std::size_t slot;
        OfferOutcome outcome;
        if (items_.size() < capacity_) {
            slot = items_.size();
            outcome = OfferOutcome::stored;
        } else {
            const auto j = rng_.below(admitted_);
            if (j >= capacity_) return OfferOutcome::discarded;
            slot = static_cast<std::size_t>(j);
            outcome = OfferOutcome::replaced;
        }
        // IDD only matters for stored items, so it runs after the reservoir draw.
        BufferItem item;
        if (gate_.idd_enabled) {
            item.frame_indices = selector_(clip, gate_.frame_budget);
            item.clip = clip.select_frames(item.frame_indices);
        } else {
            item.clip = clip;
        }
        if (item.clip.frames() != window_)
            throw ConfigError("stored clip has " + std::to_string(item.clip.frames()) + " frames, buffer window is " +
                              std::to_string(window_));
        item.label = label;
        item.logits.assign(logits.begin(), logits.end());
        item.task_id = task_id;
        item.confidence = conf;
        item.stream_index = stream_index;
        if (slot == items_.size())
            items_.push_back(std::move(item));
        else
            items_[slot] = std::move(item);
        return outcome;
    }

    // Uniform draws with replacement, deterministic in `seed`.
    std::vector<const BufferItem*> sample_batch(std::size_t batch_size, std::uint64_t seed) const {
        if (items_.empty()) throw EmptyBufferError("cannot sample from an empty replay buffer");
        Rng rng(seed);
        std::vector<const BufferItem*> out;
        out.reserve(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) out.push_back(&items_[static_cast<std::size_t>(rng.below(items_.size()))]);
        return out;
    }

    MemoryFootprint memory() const {
        if (items_.empty()) return memory_footprint(0, {}, num_classes_);
        return memory_footprint(items_.size(), items_.front().clip.shape(), num_classes_);
    }

    static double confidence(std::span<const double> logits, std::size_t label) {
        diff::Tensor t({1, logits.size()}, std::vector<double>(logits.begin(), logits.end()));
        return diff::softmax_rows(t)[label];
    }

    bool empty() const noexcept { return items_.empty(); }
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t window() const noexcept { return window_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::uint64_t offered() const noexcept { return offered_; }
    std::uint64_t admitted() const noexcept { return admitted_; }
    std::uint64_t rejected() const noexcept { return rejected_; }
    const GateConfig& gate() const noexcept { return gate_; }
    const std::vector<BufferItem>& items() const noexcept { return items_; }

private:
    std::size_t capacity_;
    std::size_t window_;
    std::size_t num_classes_;
    GateConfig gate_;
    Rng rng_;
    FrameSelector selector_;
    std::vector<BufferItem> items_;
    std::uint64_t offered_ = 0;
    std::uint64_t admitted_ = 0;
    std::uint64_t rejected_ = 0;
};

// item_index,task_id,label,confidence,stream_index
inline std::string buffer_dump_csv(const ReplayBuffer& buffer) {
    std::string out = "item_index,task_id,label,confidence,stream_index\n";
    char line[160];
    for (std::size_t i = 0; i < buffer.items().size(); ++i) {
        const auto& it = buffer.items()[i];
        std::snprintf(line, sizeof line, "%zu,%zu,%zu,%.6f,%llu\n", i, it.task_id, it.label, it.confidence,
                      static_cast<unsigned long long>(it.stream_index));
        out += line;
    }
    return out;
}

} // namespace clvid::rehearsal
