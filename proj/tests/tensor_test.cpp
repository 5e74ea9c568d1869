#include "fg/tensor.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fg/error.hpp"
#include "fg/rng.hpp"
#include "fg/tensor_io.hpp"
#include "test_support.hpp"

namespace fg {
namespace {

TEST(TensorTest, ShapeDataAgreement) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_TRUE(t.all_finite());
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ContractViolation);
  EXPECT_THROW(Tensor({0, 3}), ConfigError);
}

TEST(TensorTest, MultiIndexAccess) {
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({0, 2}), 2.0);
  EXPECT_EQ(t.at({1, 0}), 3.0);
  t.at({1, 2}) = 9.0;
  EXPECT_EQ(t[5], 9.0);
  EXPECT_THROW(t.at({2, 0}), ContractViolation);
  EXPECT_THROW(t.at({0}), ContractViolation);
}

TEST(TensorTest, IdenticalIsBitwise) {
  Tensor a({2}, {1.0, -0.0});
  Tensor b({2}, {1.0, 0.0});
  EXPECT_TRUE(a.identical(a));
  EXPECT_FALSE(a.identical(b));  // -0.0 and 0.0 differ bitwise
}

TEST(L2NormalizeTest, ThreeFourFive) {
  const Tensor v = Tensor::vector({3.0, 4.0});
  const Tensor n = l2_normalize(v, 0);
  EXPECT_DOUBLE_EQ(n[0], 0.6);
  EXPECT_DOUBLE_EQ(n[1], 0.8);
}

TEST(L2NormalizeTest, ZeroVectorUnchanged) {
  const Tensor v = Tensor::vector({0.0, 0.0});
  const Tensor n = l2_normalize(v, 0);
  EXPECT_EQ(n[0], 0.0);
  EXPECT_EQ(n[1], 0.0);
  EXPECT_TRUE(n.all_finite());
}

TEST(L2NormalizeTest, RandomVectorHasUnitNorm) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor v = test::random_tensor(rng, {8}, -2.0, 2.0);
    const Tensor n = l2_normalize(v, 0);
    EXPECT_NEAR(std::sqrt(dot(n, n)), 1.0, 1e-12);
  }
}

TEST(L2NormalizeTest, Idempotent) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor v = test::random_tensor(rng, {3, 5}, -2.0, 2.0);
    const Tensor once = l2_normalize(v, 1);
    const Tensor twice = l2_normalize(once, 1);
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_NEAR(once[i], twice[i], 1e-12);
    }
  }
}

TEST(L2NormalizeTest, NormalizesSlicesAlongRequestedAxis) {
  // Axis 0 of a 2x2: columns get unit norm.
  const Tensor v({2, 2}, {3.0, 0.0, 4.0, 2.0});
  const Tensor n = l2_normalize(v, 0);
  EXPECT_DOUBLE_EQ(n.at({0, 0}), 0.6);
  EXPECT_DOUBLE_EQ(n.at({1, 0}), 0.8);
  EXPECT_DOUBLE_EQ(n.at({0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(n.at({1, 1}), 1.0);
}

TEST(TensorIoTest, RoundTripIsBitExact) {
  Rng rng(13);
  Tensor t = test::random_tensor(rng, {3, 4, 5}, -10.0, 10.0);
  t[0] = 0.1 + 0.2;  // a value without an exact short decimal form
  t[1] = -0.0;
  t[2] = 1e-308;
  std::stringstream buffer;
  write_tensor(buffer, t);
  const Tensor back = read_tensor(buffer);
  EXPECT_TRUE(back.identical(t));
}

TEST(TensorIoTest, RejectsGarbage) {
  std::stringstream buffer;
  buffer << "definitely not a tensor";
  EXPECT_THROW(read_tensor(buffer), ContractViolation);
}

}  // namespace
}  // namespace fg
