#include "fg/pooling.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "fg/error.hpp"
#include "fg/rng.hpp"
#include "test_support.hpp"

namespace fg {
namespace {

FeatureBlock block_2x2(std::vector<double> values) {
  return FeatureBlock(Tensor({1, 2, 2}, std::move(values)));
}

// Activations with pairwise gaps far above the finite-difference epsilon, so
// probes never straddle a rank swap.
Tensor separated_activations(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  const std::size_t n = t.size();
  const double spacing = 2.0 / static_cast<double>(n);
  std::vector<double> levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    levels[i] = -1.0 + spacing * static_cast<double>(i) +
                rng.uniform(0.0, 0.25 * spacing);
  }
  rng.shuffle(levels);
  for (std::size_t i = 0; i < n; ++i) t[i] = levels[i];
  return t;
}

TEST(GkmpForwardTest, TopTwoAverage) {
  const Tensor out = gkmp_forward(block_2x2({4, 1, 3, 2}), PoolConfig::plain(2));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0], 3.5);
}

TEST(GkmpForwardTest, KOneEqualsGlobalMaxBitExact) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(4);
    const std::size_t i = 1 + rng.uniform_index(5);
    const std::size_t j = 1 + rng.uniform_index(5);
    FeatureBlock block(test::random_tensor(rng, {d, i, j}));
    const Tensor out = gkmp_forward(block, PoolConfig::plain(1));
    for (std::size_t m = 0; m < d; ++m) {
      const auto map = block.map(m);
      EXPECT_EQ(out[m], *std::max_element(map.begin(), map.end()));
    }
  }
}

TEST(GkmpForwardTest, KAllEqualsGlobalMean) {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(4);
    const std::size_t i = 1 + rng.uniform_index(5);
    const std::size_t j = 1 + rng.uniform_index(5);
    FeatureBlock block(test::random_tensor(rng, {d, i, j}));
    const Tensor out = gkmp_forward(block, PoolConfig::plain(i * j));
    for (std::size_t m = 0; m < d; ++m) {
      const auto map = block.map(m);
      const double mean =
          std::accumulate(map.begin(), map.end(), 0.0) / static_cast<double>(i * j);
      EXPECT_NEAR(out[m], mean, 1e-12);
    }
  }
}

TEST(GkmpForwardTest, PermutationInvariant) {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t i = 1 + rng.uniform_index(4);
    const std::size_t j = 1 + rng.uniform_index(4);
    const std::size_t k = 1 + rng.uniform_index(i * j);
    Tensor values = test::random_tensor(rng, {1, i, j});
    std::vector<double> shuffled(values.values().begin(), values.values().end());
    rng.shuffle(shuffled);
    const Tensor a =
        gkmp_forward(FeatureBlock(values), PoolConfig::plain(k));
    const Tensor b = gkmp_forward(FeatureBlock(Tensor({1, i, j}, shuffled)),
                                  PoolConfig::plain(k));
    EXPECT_DOUBLE_EQ(a[0], b[0]);
  }
}

TEST(GkmpForwardTest, MonotoneInEveryActivation) {
  Rng rng(24);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t i = 1 + rng.uniform_index(3);
    const std::size_t j = 1 + rng.uniform_index(3);
    const std::size_t k = 1 + rng.uniform_index(i * j);
    Tensor values = test::random_tensor(rng, {1, i, j});
    const double before =
        gkmp_forward(FeatureBlock(values), PoolConfig::plain(k))[0];
    const std::size_t cell = rng.uniform_index(i * j);
    Tensor bumped = values;
    bumped[cell] += rng.uniform(0.0, 2.0);
    const double after =
        gkmp_forward(FeatureBlock(bumped), PoolConfig::plain(k))[0];
    EXPECT_GE(after, before);
  }
}

TEST(GkmpForwardTest, RejectsOutOfRangeK) {
  EXPECT_THROW(gkmp_forward(block_2x2({1, 2, 3, 4}), PoolConfig::plain(0)),
               ConfigError);
  EXPECT_THROW(gkmp_forward(block_2x2({1, 2, 3, 4}), PoolConfig::plain(5)),
               ConfigError);
}

TEST(GkmpBackwardTest, RoutesToTopKPositions) {
  GkmpContext ctx;
  gkmp_forward(block_2x2({4, 1, 3, 2}), PoolConfig::plain(2), &ctx);
  const Tensor grad = gkmp_backward(ctx, Tensor::vector({1.0}));
  EXPECT_DOUBLE_EQ(grad[0], 0.5);
  EXPECT_DOUBLE_EQ(grad[1], 0.0);
  EXPECT_DOUBLE_EQ(grad[2], 0.5);
  EXPECT_DOUBLE_EQ(grad[3], 0.0);
}

TEST(GkmpBackwardTest, GapGradientIsUniform) {
  GkmpContext ctx;
  gkmp_forward(block_2x2({4, 1, 3, 2}), PoolConfig::plain(4), &ctx);
  const Tensor grad = gkmp_backward(ctx, Tensor::vector({1.0}));
  for (double v : grad.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(GkmpBackwardTest, TiesGoToLowestFlatIndex) {
  GkmpContext ctx;
  gkmp_forward(block_2x2({5, 5, 5, 5}), PoolConfig::plain(2), &ctx);
  ASSERT_EQ(ctx.selected.size(), 2u);
  EXPECT_EQ(ctx.selected[0], 0u);
  EXPECT_EQ(ctx.selected[1], 1u);
  const Tensor grad = gkmp_backward(ctx, Tensor::vector({1.0}));
  EXPECT_DOUBLE_EQ(grad[0], 0.5);
  EXPECT_DOUBLE_EQ(grad[1], 0.5);
  EXPECT_DOUBLE_EQ(grad[2], 0.0);
  EXPECT_DOUBLE_EQ(grad[3], 0.0);
}

TEST(GkmpGradientTest, MatchesFiniteDifferencesOnRandom4x4) {
  Rng rng(25);
  GkmpOp op(4);
  WeightedOutputSum scalar(op, Tensor::vector({1.0}));
  const auto result =
      check_gradients(scalar, {separated_activations(rng, {1, 4, 4})});
  EXPECT_TRUE(result.passed) << result.detail;
}

// Library invariant: every D, I, J in 1..5 and every valid K, ten seeds each.
TEST(GkmpGradientTest, FullShapeSweep) {
  for (std::size_t d = 1; d <= 5; ++d) {
    for (std::size_t i = 1; i <= 5; ++i) {
      for (std::size_t j = 1; j <= 5; ++j) {
        for (std::size_t k = 1; k <= i * j; ++k) {
          for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed * 1009 + d * 101 + i * 11 + j * 3 + k);
            GkmpOp op(k, /*weighted=*/true);
            WeightedOutputSum scalar(op, test::random_tensor(rng, {d}));
            const auto result = check_gradients(
                scalar, {separated_activations(rng, {d, i, j}),
                         test::random_tensor(rng, {k}, 0.1, 1.9)});
            ASSERT_TRUE(result.passed)
                << "d=" << d << " i=" << i << " j=" << j << " k=" << k
                << " seed=" << seed << ": " << result.detail;
          }
        }
      }
    }
  }
}

TEST(WeightedGkmpTest, UnitWeightsMatchUnweightedBitExact) {
  Rng rng(26);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(4);
    const std::size_t i = 1 + rng.uniform_index(4);
    const std::size_t j = 1 + rng.uniform_index(4);
    const std::size_t k = 1 + rng.uniform_index(i * j);
    FeatureBlock block(test::random_tensor(rng, {d, i, j}));
    const Tensor plain = gkmp_forward(block, PoolConfig::plain(k));
    const Tensor weighted =
        gkmp_weighted_forward(block, PoolConfig::unit_weighted(k));
    EXPECT_TRUE(plain.identical(weighted));
  }
}

TEST(WeightedGkmpTest, HandEvaluatedWeights) {
  const Tensor out = gkmp_weighted_forward(block_2x2({4, 1, 3, 2}),
                                           PoolConfig::weighted(2, {2.0, 0.0}));
  EXPECT_DOUBLE_EQ(out[0], 4.0);
}

TEST(WeightedGkmpTest, RejectsMissingOrMisSizedWeights) {
  EXPECT_THROW(
      gkmp_weighted_forward(block_2x2({1, 2, 3, 4}), PoolConfig::plain(2)),
      ConfigError);
  EXPECT_THROW(gkmp_weighted_forward(block_2x2({1, 2, 3, 4}),
                                     PoolConfig::weighted(2, {1.0})),
               ConfigError);
}

TEST(WeightedGkmpTest, WeightGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(300 + seed);
    GkmpOp op(3, /*weighted=*/true);
    WeightedOutputSum scalar(op, test::random_tensor(rng, {2}));
    const auto result =
        check_gradients(scalar, {separated_activations(rng, {2, 3, 3}),
                                 test::random_tensor(rng, {3}, 0.2, 1.8)});
    EXPECT_TRUE(result.passed) << result.detail;
  }
}

TEST(SortedActivationsTest, DescendingPermutationWithStableTies) {
  FeatureBlock block(Tensor({1, 2, 2}, {2.0, 7.0, 7.0, 1.0}));
  const SortedActivations s = sort_activations(block);
  ASSERT_EQ(s.values.size(), 4u);
  EXPECT_DOUBLE_EQ(s.values[0], 7.0);
  EXPECT_DOUBLE_EQ(s.values[1], 7.0);
  EXPECT_DOUBLE_EQ(s.values[2], 2.0);
  EXPECT_DOUBLE_EQ(s.values[3], 1.0);
  EXPECT_EQ(s.indices[0], 1u);  // stable: ties keep ascending spatial index
  EXPECT_EQ(s.indices[1], 2u);
  EXPECT_EQ(s.indices[2], 0u);
  EXPECT_EQ(s.indices[3], 3u);

  // The sorted values are a permutation of the map.
  std::vector<double> sorted_back(s.values);
  std::sort(sorted_back.begin(), sorted_back.end());
  std::vector<double> original{2.0, 7.0, 7.0, 1.0};
  std::sort(original.begin(), original.end());
  EXPECT_EQ(sorted_back, original);
}

TEST(FeatureBlockTest, RequiresRankThree) {
  EXPECT_THROW(FeatureBlock(Tensor({2, 2})), ContractViolation);
}

}  // namespace
}  // namespace fg
