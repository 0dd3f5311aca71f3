#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "clvid/diffcore/tensor.hpp"
#include "clvid/error.hpp"

namespace clvid::diff {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;
    bool is_parameter = false;
    // False for constants and detached copies: backward() from them is refused.
    bool retained = true;

    void ensure_grad() {
        if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
    }
};

inline void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
}

} // namespace detail

// Handle onto a node of a dynamically built computation graph. Copies share
// the node; parameters accumulate gradients across backward() calls until
// zero_grad().
class Var {
public:
    Var() = default;

    static Var constant(Tensor value) {
        auto n = std::make_shared<detail::Node>();
        n->value = std::move(value);
        n->retained = false;
        return Var(std::move(n));
    }

    static Var parameter(Tensor value) {
        auto n = std::make_shared<detail::Node>();
        n->value = std::move(value);
        n->requires_grad = true;
        n->is_parameter = true;
        n->ensure_grad();
        return Var(std::move(n));
    }

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    double item() const { return node_->value.item(); }

    // Gradient accumulated by the last backward passes (zeros if none).
    const Tensor& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }
    Tensor& mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool valid() const { return static_cast<bool>(node_); }

    // Same value, cut from the graph.
    Var detach() const { return constant(node_->value); }

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    template <typename Fn>
    friend Var make_result(Tensor value, std::vector<Var> inputs, Fn&& backward, const char* op);

    std::shared_ptr<detail::Node> node_;
};

// Builds an op output. The graph is only retained when some input needs
// gradients; `backward` receives (output node) and pushes into input grads.
template <typename Fn>
Var make_result(Tensor value, std::vector<Var> inputs, Fn&& backward, const char* op) {
    detail::check_finite(value, op);
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
    if (n->requires_grad) {
        for (auto& in : inputs) n->parents.push_back(in.node());
        n->backward_fn = std::forward<Fn>(backward);
    }
    return Var(std::move(n));
}

// Reverse-mode sweep from a scalar. Parameter gradients accumulate; gradients
// of intermediate nodes are reset on every call.
inline void backward(const Var& loss) {
    if (!loss.valid()) throw GraphError("backward on an empty variable");
    const auto& root = loss.node();
    if (!root->retained) throw GraphError("backward on a detached value (no retained computation graph)");
    if (root->value.size() != 1) throw GraphError("backward requires a scalar loss, got shape " + shape_str(root->value.shape()));
    if (!root->requires_grad) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    // Iterative post-order DFS.
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* n : order) {
        n->ensure_grad();
        if (!n->is_parameter) n->grad.fill(0.0);
    }
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
    for (auto* n : order)
        if (n->is_parameter) detail::check_finite(n->grad, "backward");
}

namespace detail {

inline void require_rank2(const Var& v, const char* op) {
    if (v.value().rank() != 2)
        throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " + shape_str(v.shape()));
}

inline Tensor& parent_grad(Node& out, std::size_t i) {
    auto& p = *out.parents[i];
    p.ensure_grad();
    return p.grad;
}

} // namespace detail

// [n x k] * [k x m]
inline Var matmul(const Var& a, const Var& b) {
    detail::require_rank2(a, "matmul");
    detail::require_rank2(b, "matmul");
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k)
        throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    Tensor out({n, m}, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A.at(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out.at(i, j) += aip * B.at(p, j);
        }
    return make_result(std::move(out), {a, b}, [n, k, m](detail::Node& self) {
        const Tensor& G = self.grad;
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor& gA = detail::parent_grad(self, 0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += G.at(i, j) * pb.value.at(p, j);
                    gA.at(i, p) += s;
                }
        }
        if (pb.requires_grad) {
            Tensor& gB = detail::parent_grad(self, 1);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = pa.value.at(i, p);
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < m; ++j) gB.at(p, j) += aip * G.at(i, j);
                }
        }
    }, "matmul");
}

// Adds a length-m bias to every row of an [n x m] tensor.
inline Var add_bias(const Var& x, const Var& bias) {
    detail::require_rank2(x, "add_bias");
    const std::size_t n = x.shape()[0], m = x.shape()[1];
    if (bias.value().size() != m)
        throw DimensionError("bias length " + std::to_string(bias.value().size()) + " does not match width " +
                             std::to_string(m));
    Tensor out = x.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) += bias.value()[j];
    return make_result(std::move(out), {x, bias}, [n, m](detail::Node& self) {
        if (self.parents[0]->requires_grad) {
            Tensor& gx = detail::parent_grad(self, 0);
            for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
        }
        if (self.parents[1]->requires_grad) {
            Tensor& gb = detail::parent_grad(self, 1);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) gb[j] += self.grad.at(i, j);
        }
    }, "add_bias");
}

inline Var relu(const Var& x) {
    Tensor out = x.value();
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return make_result(std::move(out), {x}, [](detail::Node& self) {
        Tensor& gx = detail::parent_grad(self, 0);
        const Tensor& in = self.parents[0]->value;
        for (std::size_t i = 0; i < in.size(); ++i)
            if (in[i] > 0.0) gx[i] += self.grad[i];
    }, "relu");
}

inline Var add(const Var& a, const Var& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_result(std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (!self.parents[k]->requires_grad) continue;
            Tensor& g = detail::parent_grad(self, k);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    }, "add");
}

inline Var scale(const Var& a, double factor) {
    Tensor out = a.value();
    for (auto& v : out.data()) v *= factor;
    return make_result(std::move(out), {a}, [factor](detail::Node& self) {
        Tensor& g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
    }, "scale");
}

// Sum of squares of all elements, as a scalar.
inline Var sum_squares(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v * v;
    return make_result(Tensor::scalar(s), {a}, [](detail::Node& self) {
        Tensor& g = detail::parent_grad(self, 0);
        const Tensor& in = self.parents[0]->value;
        const double up = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * in[i] * up;
    }, "sum_squares");
}

// Row-wise softmax of a plain tensor (no graph). Max-shifted for stability.
inline Tensor softmax_rows(const Tensor& logits, double temperature = 1.0) {
    if (logits.rank() != 2) throw DimensionError("softmax expects rank-2 logits, got " + shape_str(logits.shape()));
    Tensor out(logits.shape(), 0.0);
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits.at(i, j) / temperature);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp(logits.at(i, j) / temperature - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (std::size_t j = 0; j < k; ++j) out.at(i, j) /= z;
    }
    return out;
}

inline Tensor log_softmax_rows(const Tensor& logits, double temperature = 1.0) {
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor out(logits.shape(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits.at(i, j) / temperature);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(i, j) / temperature - mx);
        const double lz = mx + std::log(z);
        for (std::size_t j = 0; j < k; ++j) out.at(i, j) = logits.at(i, j) / temperature - lz;
    }
    return out;
}

// Mean over the batch of -log softmax(logits)[label].
inline Var cross_entropy(const Var& logits, std::span<const std::size_t> labels) {
    detail::require_rank2(logits, "cross_entropy");
    const std::size_t n = logits.shape()[0], k = logits.shape()[1];
    if (labels.size() != n)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(n));
    for (auto y : labels)
        if (y >= k) throw IndexError("label " + std::to_string(y) + " out of range for " + std::to_string(k) + " classes");
    const Tensor logp = log_softmax_rows(logits.value());
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) loss -= logp.at(i, labels[i]);
    loss /= static_cast<double>(n);
    std::vector<std::size_t> ys(labels.begin(), labels.end());
    return make_result(Tensor::scalar(loss), {logits}, [ys = std::move(ys), n, k](detail::Node& self) {
        Tensor& g = detail::parent_grad(self, 0);
        const Tensor p = softmax_rows(self.parents[0]->value);
        const double up = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) g.at(i, j) += up * (p.at(i, j) - (j == ys[i] ? 1.0 : 0.0));
    }, "cross_entropy");
}

// Mean of squared elementwise differences.
inline Var mse(const Var& a, const Var& b) {
    if (a.shape() != b.shape())
        throw DimensionError("mse shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t count = a.value().size();
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = a.value()[i] - b.value()[i];
        s += d * d;
    }
    return make_result(Tensor::scalar(s / static_cast<double>(count)), {a, b}, [count](detail::Node& self) {
        const Tensor& va = self.parents[0]->value;
        const Tensor& vb = self.parents[1]->value;
        const double up = 2.0 * self.grad[0] / static_cast<double>(count);
        for (std::size_t k = 0; k < 2; ++k) {
            if (!self.parents[k]->requires_grad) continue;
            Tensor& g = detail::parent_grad(self, k);
            const double sign = k == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < count; ++i) g[i] += sign * up * (va[i] - vb[i]);
        }
    }, "mse");
}

// Batch mean of KL(softmax(teacher/T) || softmax(student/T)). Teacher is
// treated as a fixed target.
inline Var distillation_kl(const Var& student, const Tensor& teacher, double temperature) {
    detail::require_rank2(student, "distillation_kl");
    if (student.shape() != teacher.shape())
        throw DimensionError("distillation_kl shape mismatch: " + shape_str(student.shape()) + " vs " +
                             shape_str(teacher.shape()));
    if (!(temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
    const std::size_t n = student.shape()[0], k = student.shape()[1];
    const Tensor pt = softmax_rows(teacher, temperature);
    const Tensor logpt = log_softmax_rows(teacher, temperature);
    const Tensor logps = log_softmax_rows(student.value(), temperature);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (pt.at(i, j) > 0.0) kl += pt.at(i, j) * (logpt.at(i, j) - logps.at(i, j));
    kl /= static_cast<double>(n);
    return make_result(Tensor::scalar(kl), {student}, [pt, n, k, temperature](detail::Node& self) {
        Tensor& g = detail::parent_grad(self, 0);
        const Tensor ps = softmax_rows(self.parents[0]->value, temperature);
        const double up = self.grad[0] / (static_cast<double>(n) * temperature);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) g.at(i, j) += up * (ps.at(i, j) - pt.at(i, j));
    }, "distillation_kl");
}

// sum_i weight_i * (x_i - anchor_i)^2
inline Var weighted_sq_distance(const Var& x, const Tensor& anchor, const Tensor& weight) {
    if (x.shape() != anchor.shape() || x.shape() != weight.shape())
        throw ConfigError("weighted distance shape mismatch: parameter " + shape_str(x.shape()) + ", anchor " +
                          shape_str(anchor.shape()) + ", weight " + shape_str(weight.shape()));
    double s = 0.0;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        const double d = x.value()[i] - anchor[i];
        s += weight[i] * d * d;
    }
    return make_result(Tensor::scalar(s), {x}, [anchor, weight](detail::Node& self) {
        Tensor& g = detail::parent_grad(self, 0);
        const Tensor& xv = self.parents[0]->value;
        const double up = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * 2.0 * weight[i] * (xv[i] - anchor[i]);
    }, "weighted_sq_distance");
}

// Rows [begin, end) of a rank-2 variable.
inline Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
    detail::require_rank2(x, "slice_rows");
    const std::size_t m = x.shape()[1];
    if (begin >= end || end > x.shape()[0]) throw DimensionError("slice_rows range out of bounds");
    Tensor out({end - begin, m}, 0.0);
    std::copy(x.value().data().begin() + begin * m, x.value().data().begin() + end * m, out.data().begin());
    return make_result(std::move(out), {x}, [begin, m](detail::Node& self) {
        Tensor& g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * m + i] += self.grad[i];
    }, "slice_rows");
}

} // namespace clvid::diff
