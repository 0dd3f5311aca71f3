#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "clvid/diffcore/model.hpp"

namespace clvid::diff {

enum class OptimizerKind { sgd, rmsprop };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::rmsprop;
    double lr = 1e-3;
    double rho = 0.99;
    double eps = 1e-8;
    std::vector<Tensor> accumulators;  // one per parameter, rmsprop only
};

inline OptimizerState make_optimizer(OptimizerKind kind, double lr, double rho = 0.99, double eps = 1e-8) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (kind == OptimizerKind::rmsprop && !(rho >= 0.0 && rho < 1.0)) throw ConfigError("rmsprop decay must lie in [0, 1)");
    if (kind == OptimizerKind::rmsprop && !(eps > 0.0)) throw ConfigError("rmsprop epsilon must be positive");
    return OptimizerState{kind, lr, rho, eps, {}};
}

// One update from the gradients currently held by `params`.
//   sgd:     theta -= lr * g
//   rmsprop: v = rho * v + (1 - rho) * g^2;  theta -= lr * g / sqrt(v + eps)
inline void step(ParamVector& params, OptimizerState& opt) {
    for (std::size_t i = 0; i < params.count(); ++i)
        if (!params[i].grad().all_finite())
            throw NumericError("non-finite gradient for parameter '" + params.name(i) + "'");

    if (opt.kind == OptimizerKind::rmsprop && opt.accumulators.size() != params.count()) {
        opt.accumulators.clear();
        for (std::size_t i = 0; i < params.count(); ++i) opt.accumulators.emplace_back(params[i].shape(), 0.0);
    }
    for (std::size_t i = 0; i < params.count(); ++i) {
        auto theta = params[i].mutable_value().data();
        const auto g = params[i].grad().data();
        if (opt.kind == OptimizerKind::sgd) {
            for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= opt.lr * g[j];
        } else {
            auto v = opt.accumulators[i].data();
            for (std::size_t j = 0; j < theta.size(); ++j) {
                v[j] = opt.rho * v[j] + (1.0 - opt.rho) * g[j] * g[j];
                theta[j] -= opt.lr * g[j] / std::sqrt(v[j] + opt.eps);
            }
        }
    }
}

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "rmsprop"; }

} // namespace clvid::diff
