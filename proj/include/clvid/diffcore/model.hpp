#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clvid/diffcore/autograd.hpp"
#include "clvid/random.hpp"

namespace clvid::diff {

// Named parameter tensors with gradients, addressable as one flat vector of
// dimension D (concatenation in insertion order).
class ParamVector {
public:
    void add(std::string name, Tensor value) {
        for (const auto& n : names_)
            if (n == name) throw ConfigError("duplicate parameter name '" + name + "'");
        names_.push_back(std::move(name));
        params_.push_back(Var::parameter(std::move(value)));
    }

    std::size_t count() const noexcept { return params_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const Var& operator[](std::size_t i) const { return params_.at(i); }
    Var& operator[](std::size_t i) { return params_.at(i); }

    std::size_t dimension() const {
        std::size_t d = 0;
        for (const auto& p : params_) d += p.value().size();
        return d;
    }

    void zero_grad() {
        for (auto& p : params_) p.mutable_grad().fill(0.0);
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(dimension());
        for (const auto& p : params_) out.insert(out.end(), p.value().data().begin(), p.value().data().end());
        return out;
    }

    std::vector<double> flatten_grad() const {
        std::vector<double> out;
        out.reserve(dimension());
        for (const auto& p : params_) out.insert(out.end(), p.grad().data().begin(), p.grad().data().end());
        return out;
    }

    void unflatten(std::span<const double> flat) {
        check_flat(flat.size());
        std::size_t off = 0;
        for (auto& p : params_) {
            auto dst = p.mutable_value().data();
            std::copy(flat.begin() + off, flat.begin() + off + dst.size(), dst.begin());
            off += dst.size();
        }
    }

    void set_flat_grad(std::span<const double> flat) {
        check_flat(flat.size());
        std::size_t off = 0;
        for (auto& p : params_) {
            auto dst = p.mutable_grad().data();
            std::copy(flat.begin() + off, flat.begin() + off + dst.size(), dst.begin());
            off += dst.size();
        }
    }

    // Independent copy: fresh parameter nodes, gradients zeroed.
    ParamVector clone() const {
        ParamVector out;
        for (std::size_t i = 0; i < params_.size(); ++i) out.add(names_[i], params_[i].value());
        return out;
    }

    std::vector<Tensor> values() const {
        std::vector<Tensor> out;
        for (const auto& p : params_) out.push_back(p.value());
        return out;
    }

private:
    void check_flat(std::size_t n) const {
        if (n != dimension())
            throw DimensionError("flat vector of length " + std::to_string(n) + " for parameter dimension " +
                                 std::to_string(dimension()));
    }

    std::vector<std::string> names_;
    std::vector<Var> params_;
};

enum class Activation { relu, linear };

struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;  // empty: single linear layer
    std::size_t output_dim = 0;
    Activation activation = Activation::relu;
};

// Fully connected classifier: x -> [W_l x + b_l, activation]* -> logits.
// Weights are stored [in x out] so a batch multiplies from the left.
class Mlp {
public:
    Mlp() = default;

    Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
        if (spec_.input_dim == 0 || spec_.output_dim == 0) throw DimensionError("MLP input/output widths must be positive");
        Rng rng(seed);
        std::size_t in = spec_.input_dim;
        auto widths = spec_.hidden;
        widths.push_back(spec_.output_dim);
        for (std::size_t l = 0; l < widths.size(); ++l) {
            const std::size_t out = widths[l];
            Tensor w({in, out}, 0.0);
            const double stddev = std::sqrt(2.0 / static_cast<double>(in));
            for (auto& v : w.data()) v = rng.normal(0.0, stddev);
            params_.add("layer" + std::to_string(l) + ".weight", std::move(w));
            params_.add("layer" + std::to_string(l) + ".bias", Tensor({out}, 0.0));
            in = out;
        }
    }

    // Builds an MLP with the given spec and explicitly supplied parameters.
    static Mlp from_params(MlpSpec spec, ParamVector params) {
        Mlp m;
        m.spec_ = std::move(spec);
        m.params_ = std::move(params);
        const std::size_t layers = m.spec_.hidden.size() + 1;
        if (m.params_.count() != 2 * layers) throw ConfigError("parameter count does not match MLP spec");
        return m;
    }

    const MlpSpec& spec() const noexcept { return spec_; }
    ParamVector& params() noexcept { return params_; }
    const ParamVector& params() const noexcept { return params_; }
    std::size_t num_classes() const noexcept { return spec_.output_dim; }

    Mlp clone() const { return from_params(spec_, params_.clone()); }

private:
    MlpSpec spec_;
    ParamVector params_;
};

// Pre-softmax logits [B x K] for a batch [B x D_in]; graph retained.
inline Var forward_mlp(const Mlp& model, const Tensor& batch) {
    const auto& spec = model.spec();
    if (batch.rank() != 2 || batch.dim(1) != spec.input_dim)
        throw DimensionError("batch shape " + shape_str(batch.shape()) + " does not match model input width " +
                             std::to_string(spec.input_dim));
    Var h = Var::constant(batch);
    const std::size_t layers = spec.hidden.size() + 1;
    const auto& p = model.params();
    for (std::size_t l = 0; l < layers; ++l) {
        h = add_bias(matmul(h, p[2 * l]), p[2 * l + 1]);
        if (l + 1 < layers && spec.activation == Activation::relu) h = relu(h);
    }
    return h;
}

} // namespace clvid::diff
