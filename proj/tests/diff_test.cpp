#include "fg/diff.hpp"

#include <gtest/gtest.h>

#include "fg/error.hpp"
#include "fg/rng.hpp"
#include "test_support.hpp"

namespace fg {
namespace {

TEST(FiniteDifferenceTest, SumOfSquares) {
  test::SumSquaresOp op;
  const auto grads =
      finite_difference_gradient(op, {Tensor::vector({3.0})}, 1e-4);
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_NEAR(grads[0][0], 6.0, 1e-8);
}

TEST(FiniteDifferenceTest, ConstantHasZeroGradient) {
  test::ConstantOp op(42.0);
  Rng rng(4);
  const auto grads = finite_difference_gradient(
      op, {test::random_tensor(rng, {2, 3})}, 1e-4);
  for (double v : grads[0].values()) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifferenceTest, RejectsNonScalarOps) {
  test::IdentityOp op;
  EXPECT_THROW(
      finite_difference_gradient(op, {Tensor::vector({1.0, 2.0})}, 1e-4),
      ContractViolation);
}

TEST(FiniteDifferenceTest, RejectsNonPositiveEpsilon) {
  test::SumSquaresOp op;
  EXPECT_THROW(finite_difference_gradient(op, {Tensor::vector({1.0})}, 0.0),
               ConfigError);
}

TEST(GradCheckTest, PassesForCorrectBackward) {
  test::SumSquaresOp op;
  Rng rng(5);
  const auto result =
      check_gradients(op, {test::random_tensor(rng, {4}), test::random_tensor(rng, {2, 2})});
  EXPECT_TRUE(result.passed) << result.detail;
}

// Deliberately wrong backward: the checker itself must catch it.
class WrongGradientOp final : public DifferentiableOp {
 public:
  Tensor forward(const std::vector<Tensor>& inputs) override {
    input_ = inputs.at(0);
    double acc = 0.0;
    for (double v : input_.values()) acc += v * v;
    return Tensor::scalar(acc);
  }
  std::vector<Tensor> backward(const Tensor&) override {
    Tensor g = input_;
    g *= 3.0;  // should be 2x
    return {g};
  }

 private:
  Tensor input_;
};

TEST(GradCheckTest, FlagsWrongBackward) {
  WrongGradientOp op;
  const auto result = check_gradients(op, {Tensor::vector({1.0, -2.0})});
  EXPECT_FALSE(result.passed);
  EXPECT_FALSE(result.detail.empty());
}

TEST(WeightedOutputSumTest, BackwardBeforeForwardIsRejected) {
  test::IdentityOp identity;
  WeightedOutputSum scalar(identity, Tensor::vector({1.0, 1.0}));
  EXPECT_THROW(scalar.backward(Tensor::scalar(1.0)), ContractViolation);
}

TEST(WeightedOutputSumTest, ProjectsVectorOps) {
  test::IdentityOp identity;
  WeightedOutputSum scalar(identity, Tensor::vector({2.0, -1.0}));
  const Tensor out = scalar.forward({Tensor::vector({3.0, 4.0})});
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  const auto grads = scalar.backward(Tensor::scalar(1.0));
  EXPECT_DOUBLE_EQ(grads[0][0], 2.0);
  EXPECT_DOUBLE_EQ(grads[0][1], -1.0);
}

}  // namespace
}  // namespace fg
