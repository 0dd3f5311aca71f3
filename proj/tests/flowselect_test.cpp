#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "clvid/flowselect/flow.hpp"
#include "clvid/flowselect/idd.hpp"
#include "clvid/videodata/synthetic.hpp"
#include "flow_fixtures.hpp"

using namespace clvid;
using namespace clvid::flow;

TEST(EstimateFlow, IdenticalFramesGiveZeroFlow) {
    const Plane a = fixtures::smooth_pattern(64, 64, 0.0, 0.0);
    const auto f = estimate_flow(a, a, FlowConfig{});
    double mag = 0.0;
    for (std::size_t i = 0; i < f.u.size(); ++i) mag += std::hypot(f.u[i], f.v[i]);
    EXPECT_LT(mag / static_cast<double>(f.u.size()), 0.05);
}

TEST(EstimateFlow, RecoversHorizontalShift) {
    const auto [u, v] = fixtures::interior_mean_flow(2.0, 0.0);
    EXPECT_NEAR(u, 2.0, 0.25);
    EXPECT_NEAR(v, 0.0, 0.25);
}

TEST(EstimateFlow, RecoversVerticalShift) {
    const auto [u, v] = fixtures::interior_mean_flow(0.0, -3.0);
    EXPECT_NEAR(u, 0.0, 0.25);
    EXPECT_NEAR(v, -3.0, 0.25);
}

TEST(EstimateFlow, MagnitudeGrowsWithShift) {
    double last = 0.0;
    for (double s : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
        const auto [u, v] = fixtures::interior_mean_flow(s, 0.0);
        const double mag = std::hypot(u, v);
        EXPECT_GT(mag, last) << "shift " << s;
        last = mag;
    }
}

TEST(EstimateFlow, ShapeErrors) {
    EXPECT_THROW(estimate_flow(Plane(32, 32), Plane(32, 31), FlowConfig{}), DimensionError);
    EXPECT_THROW(estimate_flow(Plane(8, 8), Plane(8, 8), FlowConfig{}), DimensionError);
    FlowConfig bad;
    bad.radius = 1;
    EXPECT_THROW(estimate_flow(Plane(32, 32), Plane(32, 32), bad), ConfigError);
}

TEST(TransitionNorms, StaticClipBelowBound) {
    const auto clip = fixtures::translating_clip(8, 32, 32, 0.0, 0.0);
    const auto norms = transition_norms(clip, FlowConfig{});
    ASSERT_EQ(norms.size(), 7u);
    for (double n : norms) EXPECT_LT(n, 0.05 * std::sqrt(32.0 * 32.0));
}

TEST(TransitionNorms, UniformUnitTranslation) {
    const auto clip = fixtures::translating_clip(6, 48, 48, 1.0, 0.0);
    const auto norms = transition_norms(clip, FlowConfig{});
    ASSERT_EQ(norms.size(), 5u);
    const double expected = std::sqrt(48.0 * 48.0);
    for (double n : norms) EXPECT_NEAR(n, expected, 0.1 * expected);
    for (double a : norms)
        for (double b : norms) EXPECT_LE(std::abs(a - b), 0.1 * std::max(a, b));
}

TEST(TransitionNorms, ArgmaxAtTheMovingTransition) {
    // Frames 0-3 identical, frame 4 shifted by 2 px, frames 4-7 identical.
    std::vector<double> offsets{0, 0, 0, 0, 2, 2, 2, 2};
    const auto clip = fixtures::clip_from_offsets(offsets, 32, 32);
    const auto norms = transition_norms(clip, FlowConfig{});
    ASSERT_EQ(norms.size(), 7u);
    EXPECT_EQ(std::max_element(norms.begin(), norms.end()) - norms.begin(), 3);
}

TEST(TransitionNorms, LengthIsFramesMinusOne) {
    for (std::size_t p : {2u, 3u, 9u}) {
        const auto clip = fixtures::translating_clip(p, 16, 16, 1.0, 1.0);
        EXPECT_EQ(transition_norms(clip, FlowConfig{}).size(), p - 1);
    }
}

TEST(FrameScores, MaxOfAdjacentTransitions) {
    const std::vector<double> norms{1.0, 5.0, 2.0};
    EXPECT_EQ(frame_scores(norms), (std::vector<double>{1.0, 5.0, 5.0, 2.0}));
}

TEST(SelectTopFrames, TiesPreferEarlierFrames) {
    const std::vector<double> equal(15, 3.0);
    EXPECT_EQ(select_top_frames(equal, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SelectTopFrames, MatchesBruteForceOverScoreAssignments) {
    // Exhaustive check on all norm vectors over a small alphabet: the
    // selection must be the lexicographically-first maximum-score subset.
    const std::size_t p = 6, k = 3;
    const std::vector<double> alphabet{0.0, 1.0, 2.0};
    std::vector<double> norms(p - 1);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < p - 1; ++i) combos *= alphabet.size();
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        for (auto& n : norms) {
            n = alphabet[c % alphabet.size()];
            c /= alphabet.size();
        }
        const auto scores = frame_scores(norms);
        std::vector<std::size_t> best;
        double best_sum = -1.0;
        for (std::size_t mask = 0; mask < (1u << p); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask))) != k) continue;
            std::vector<std::size_t> subset;
            double sum = 0.0;
            for (std::size_t j = 0; j < p; ++j)
                if (mask & (1u << j)) {
                    subset.push_back(j);
                    sum += scores[j];
                }
            // Among equal sums the earliest-index subset wins: compare sorted
            // index lists lexicographically.
            if (sum > best_sum || (sum == best_sum && subset < best)) {
                best_sum = sum;
                best = subset;
            }
        }
        EXPECT_EQ(select_top_frames(norms, k), best) << "code " << code;
    }
}

TEST(IddSelect, FullBudgetIsIdentity) {
    const auto clip = fixtures::translating_clip(16, 32, 32, 1.0, 0.0);
    const auto sel = idd_select(clip, 16, FlowConfig{});
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(sel[i], i);
}

TEST(IddSelect, PicksTheMovingHalf) {
    std::vector<double> offsets(16, 0.0);
    for (std::size_t f = 9; f < 16; ++f) offsets[f] = 2.0 * static_cast<double>(f - 8);
    const auto clip = fixtures::clip_from_offsets(offsets, 32, 32);
    const auto sel = idd_select(clip, 4, FlowConfig{});
    ASSERT_EQ(sel.size(), 4u);
    for (std::size_t i = 0; i < sel.size(); ++i) {
        EXPECT_GE(sel[i], 8u);
        EXPECT_LE(sel[i], 15u);
        if (i) {
            EXPECT_LT(sel[i - 1], sel[i]);
        }
    }
    EXPECT_EQ(idd_select(clip, 4, FlowConfig{}), sel);
}

TEST(IddSelect, BudgetErrors) {
    const auto clip = fixtures::translating_clip(6, 16, 16, 1.0, 0.0);
    EXPECT_THROW(idd_select(clip, 7, FlowConfig{}), BudgetError);
    EXPECT_THROW(idd_select(clip, 1, FlowConfig{}), BudgetError);
}

TEST(IddSelect, OutputAlwaysStrictlyAscendingAndInRange) {
    const video::ClipShape shape{12, 24, 24, 3};
    for (std::size_t cls = 0; cls < 6; ++cls) {
        const auto clip = video::render_synthetic_clip(cls, 0, shape, 77);
        for (std::size_t k : {2u, 5u, 11u}) {
            const auto sel = idd_select(clip, k, FlowConfig{});
            ASSERT_EQ(sel.size(), k);
            for (std::size_t i = 0; i < k; ++i) {
                EXPECT_LT(sel[i], 12u);
                if (i) {
                    EXPECT_LT(sel[i - 1], sel[i]);
                }
            }
        }
    }
}
