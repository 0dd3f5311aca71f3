#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "clvid/diffcore/autograd.hpp"
#include "clvid/diffcore/checkpoint.hpp"
#include "clvid/diffcore/model.hpp"
#include "clvid/diffcore/optim.hpp"
#include "oracles.hpp"

using namespace clvid;
using namespace clvid::diff;

namespace {

Mlp two_layer(std::uint64_t seed, std::size_t in = 6, std::size_t hidden = 4, std::size_t out = 3) {
    return Mlp(MlpSpec{in, {hidden}, out, Activation::relu}, seed);
}

} // namespace

TEST(Tensor, RejectsDataShapeMismatch) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    EXPECT_THROW(Tensor({0, 3}), DimensionError);
    EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(ForwardMlp, ZeroParametersGiveZeroLogits) {
    Mlp m = two_layer(1);
    auto flat = m.params().flatten();
    std::fill(flat.begin(), flat.end(), 0.0);
    m.params().unflatten(flat);
    const auto logits = forward_mlp(m, oracle::random_tensor({5, 6}, 2));
    for (double v : logits.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardMlp, IdentityLinearLayer) {
    ParamVector p;
    Tensor eye({5, 5}, 0.0);
    for (std::size_t i = 0; i < 5; ++i) eye.at(i, i) = 1.0;
    p.add("layer0.weight", eye);
    p.add("layer0.bias", Tensor({5}, 0.0));
    const Mlp m = Mlp::from_params(MlpSpec{5, {}, 5, Activation::linear}, std::move(p));
    Tensor x({1, 5}, 0.0);
    x.at(0, 3) = 1.0;
    const auto logits = forward_mlp(m, x);
    EXPECT_EQ(logits.value(), Tensor({1, 5}, std::vector<double>{0, 0, 0, 1, 0}));
}

TEST(ForwardMlp, MatchesStraightLineOracle) {
    const Mlp m = two_layer(7);
    const Tensor x = oracle::random_tensor({3, 6}, 70);
    const auto got = forward_mlp(m, x).value();
    const auto want = oracle::mlp_forward(m, oracle::to_matrix(x));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got.at(i, j), want[i][j], 1e-12);
}

TEST(ForwardMlp, WidthMismatchIsDimensionError) {
    const Mlp m = two_layer(7);
    EXPECT_THROW(forward_mlp(m, Tensor({2, 5})), DimensionError);
}

TEST(CrossEntropy, UniformSoftmaxGivesLogK) {
    const auto logits = Var::constant(Tensor({3, 4}, 0.0));
    const std::vector<std::size_t> labels{0, 3, 2};
    EXPECT_NEAR(cross_entropy(logits, labels).item(), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, SaturatedMarginIsZero) {
    Tensor t({2, 3}, 0.0);
    t.at(0, 1) = 1000.0;
    t.at(1, 2) = 1000.0;
    const std::vector<std::size_t> labels{1, 2};
    EXPECT_NEAR(cross_entropy(Var::constant(t), labels).item(), 0.0, 1e-12);
}

TEST(CrossEntropy, MatchesExtendedPrecisionOracle) {
    const Tensor t = oracle::random_tensor({2, 3}, 11, 3.0);
    const std::vector<std::size_t> labels{2, 0};
    const double got = cross_entropy(Var::constant(t), labels).item();
    const long double want = oracle::cross_entropy(oracle::to_matrix(t), labels);
    EXPECT_NEAR(got, static_cast<double>(want), 1e-10);
}

TEST(CrossEntropy, LabelOutOfRangeIsIndexError) {
    const std::vector<std::size_t> labels{4};
    EXPECT_THROW(cross_entropy(Var::constant(Tensor({1, 4})), labels), IndexError);
}

TEST(Softmax, RowsSumToOne) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = softmax_rows(oracle::random_tensor({4, 7}, seed, 10.0));
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 7; ++j) s += p.at(i, j);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Mse, ReferenceValues) {
    const Tensor a = oracle::random_tensor({3, 4}, 3);
    EXPECT_EQ(mse(Var::constant(a), Var::constant(a)).item(), 0.0);
    Tensor b = a;
    for (auto& v : b.data()) v += 1.0;
    EXPECT_NEAR(mse(Var::constant(b), Var::constant(a)).item(), 1.0, 1e-15);
    const Tensor c = oracle::random_tensor({3, 4}, 33);
    EXPECT_NEAR(mse(Var::constant(a), Var::constant(c)).item(),
                oracle::mse(oracle::to_matrix(a), oracle::to_matrix(c)), 1e-12);
    EXPECT_THROW(mse(Var::constant(a), Var::constant(Tensor({4, 3}))), DimensionError);
}

TEST(Backward, ConstantLossLeavesGradientsZero) {
    Mlp m = two_layer(5);
    const auto loss = mse(Var::constant(Tensor({2, 2}, 1.0)), Var::constant(Tensor({2, 2}, 3.0)));
    backward(loss);
    for (double g : m.params().flatten_grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, SquareOfScalarParameter) {
    auto theta = Var::parameter(Tensor::scalar(3.0));
    backward(sum_squares(theta));
    EXPECT_DOUBLE_EQ(theta.grad().item(), 6.0);
}

TEST(Backward, AccumulatesUntilZeroed) {
    ParamVector p;
    p.add("theta", Tensor::scalar(3.0));
    const auto loss = sum_squares(p[0]);
    backward(loss);
    backward(loss);
    EXPECT_DOUBLE_EQ(p[0].grad().item(), 12.0);
    p.zero_grad();
    EXPECT_DOUBLE_EQ(p[0].grad().item(), 0.0);
}

TEST(Backward, DetachedScalarIsGraphError) {
    auto theta = Var::parameter(Tensor::scalar(3.0));
    const auto loss = sum_squares(theta).detach();
    EXPECT_THROW(backward(loss), GraphError);
    EXPECT_THROW(backward(Var::constant(Tensor::scalar(1.0))), GraphError);
}

TEST(Backward, NonScalarIsGraphError) {
    auto theta = Var::parameter(Tensor({2}, 1.0));
    EXPECT_THROW(backward(scale(theta, 2.0)), GraphError);
}

TEST(Backward, MatchesFiniteDifferencesForEveryPrimitiveLoss) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Mlp m = two_layer(100 + seed, 6, 5, 4);
        const Tensor x = oracle::random_tensor({3, 6}, 200 + seed);
        const Tensor target = oracle::random_tensor({3, 4}, 300 + seed);
        const std::vector<std::size_t> labels{0, 3, 1};
        const std::vector<std::function<Var()>> losses{
            [&] { return cross_entropy(forward_mlp(m, x), labels); },
            [&] { return mse(forward_mlp(m, x), Var::constant(target)); },
            [&] { return distillation_kl(forward_mlp(m, x), target, 2.0); },
        };
        for (const auto& loss : losses) {
            m.params().zero_grad();
            backward(loss());
            const auto analytic = m.params().flatten_grad();
            const auto numeric = oracle::finite_difference(m.params(), [&] { return loss().item(); });
            EXPECT_LE(oracle::max_relative_error(analytic, numeric), 1e-4);
        }
    }
}

TEST(Optimizer, SgdStep) {
    ParamVector p;
    p.add("theta", Tensor::scalar(1.0));
    p[0].mutable_grad()[0] = 2.0;
    auto opt = make_optimizer(OptimizerKind::sgd, 0.1);
    step(p, opt);
    EXPECT_DOUBLE_EQ(p[0].value().item(), 0.8);
}

TEST(Optimizer, RmspropStep) {
    ParamVector p;
    p.add("theta", Tensor::scalar(1.0));
    p[0].mutable_grad()[0] = 4.0;
    auto opt = make_optimizer(OptimizerKind::rmsprop, 0.01, 0.9, 1e-8);
    step(p, opt);
    EXPECT_NEAR(opt.accumulators[0].item(), 1.6, 1e-15);
    EXPECT_NEAR(p[0].value().item(), 1.0 - 0.01 * 4.0 / std::sqrt(1.6 + 1e-8), 1e-15);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
    Mlp m = two_layer(9);
    const auto before = m.params().flatten();
    m.params().zero_grad();
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::rmsprop}) {
        auto opt = make_optimizer(kind, 0.5);
        step(m.params(), opt);
        EXPECT_EQ(m.params().flatten(), before);
    }
}

TEST(Optimizer, NanGradientIsNumericError) {
    ParamVector p;
    p.add("theta", Tensor::scalar(1.0));
    p[0].mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
    auto opt = make_optimizer(OptimizerKind::sgd, 0.1);
    EXPECT_THROW(step(p, opt), NumericError);
    EXPECT_EQ(p[0].value().item(), 1.0);
}

TEST(Determinism, SameSeedIsBitwiseIdentical) {
    auto run = [] {
        Mlp m = two_layer(42);
        const Tensor x = oracle::random_tensor({4, 6}, 43);
        const std::vector<std::size_t> labels{0, 1, 2, 1};
        auto opt = make_optimizer(OptimizerKind::rmsprop, 1e-2);
        std::vector<double> trace;
        for (int s = 0; s < 5; ++s) {
            m.params().zero_grad();
            const auto logits = forward_mlp(m, x);
            const auto loss = cross_entropy(logits, labels);
            backward(loss);
            trace.push_back(loss.item());
            for (double g : m.params().flatten_grad()) trace.push_back(g);
            step(m.params(), opt);
        }
        for (double v : m.params().flatten()) trace.push_back(v);
        return trace;
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(ParamVector, FlattenUnflattenIdentity) {
    Mlp m = two_layer(3);
    const auto flat = m.params().flatten();
    EXPECT_EQ(flat.size(), 6u * 4 + 4 + 4 * 3 + 3);
    Mlp other = two_layer(4);
    other.params().unflatten(flat);
    EXPECT_EQ(other.params().flatten(), flat);
    EXPECT_THROW(other.params().unflatten(std::vector<double>(3)), DimensionError);
}

TEST(ParamVector, GradientShapesMirrorParameters) {
    Mlp m = two_layer(3);
    for (std::size_t i = 0; i < m.params().count(); ++i) EXPECT_EQ(m.params()[i].grad().shape(), m.params()[i].shape());
}

TEST(Checkpoint, RoundTripAndLayout) {
    Mlp m = two_layer(12);
    const auto bytes = encode_checkpoint(m.params());
    ASSERT_GE(bytes.size(), 5u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CLWB");
    EXPECT_EQ(bytes[4], kCheckpointVersion);
    // First entry: u16 name length then "layer0.weight", rank 2, extents 6 and 4.
    EXPECT_EQ(bytes[5], 13);
    EXPECT_EQ(bytes[6], 0);
    EXPECT_EQ(std::string(bytes.begin() + 7, bytes.begin() + 20), "layer0.weight");
    EXPECT_EQ(bytes[20], 2);
    EXPECT_EQ(bytes[21], 6);
    EXPECT_EQ(bytes[25], 4);

    const auto path = (std::filesystem::temp_directory_path() / "clvid_ckpt_test.clwb").string();
    save_checkpoint(path, m.params());
    Mlp other = two_layer(13);
    load_checkpoint(path, other.params());
    EXPECT_EQ(other.params().flatten(), m.params().flatten());
    std::filesystem::remove(path);
}

TEST(Checkpoint, MalformedInputs) {
    Mlp m = two_layer(12);
    auto bytes = encode_checkpoint(m.params());
    auto bad = bytes;
    bad[0] = 'X';
    try {
        decode_checkpoint(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    bytes.pop_back();
    EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}
