#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fg/tensor.hpp"

namespace fg {

// Contract for a differentiable operation. forward() caches whatever the
// backward pass needs inside the instance; backward() consumes exactly the
// context of the matching forward call. Instances are therefore stateful and
// single-threaded; run independent ops on independent instances.
class DifferentiableOp {
 public:
  virtual ~DifferentiableOp() = default;

  virtual Tensor forward(const std::vector<Tensor>& inputs) = 0;

  // Gradients with respect to every input, same shapes as the inputs.
  virtual std::vector<Tensor> backward(const Tensor& output_grad) = 0;
};

// Central-difference gradient estimate (f(x+eps e) - f(x-eps e)) / (2 eps)
// per element of every input. The op must be loss-valued (scalar output);
// anything else is a contract violation. This is the verification oracle the
// whole gradient suite is checked against, so it deliberately goes through
// nothing but repeated forward evaluations.
std::vector<Tensor> finite_difference_gradient(DifferentiableOp& op,
                                               const std::vector<Tensor>& inputs,
                                               double epsilon);

struct GradCheckOptions {
  double epsilon = 1e-4;
  double relative_tolerance = 1e-4;
  double absolute_floor = 1e-7;
};

struct GradCheckResult {
  bool passed = true;
  double worst_error = 0.0;  // |analytic - numeric| at the worst element
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  std::string detail;
};

// Runs forward + analytic backward once, then compares against the
// finite-difference oracle element by element:
//   |a - n| <= max(absolute_floor, relative_tolerance * max(|a|, |n|)).
GradCheckResult check_gradients(DifferentiableOp& op,
                                const std::vector<Tensor>& inputs,
                                const GradCheckOptions& opts = {});

// Wraps a vector-valued op as the scalar sum_i coefficients[i] * out[i] so it
// can be pushed through finite_difference_gradient. Checking this projection
// for a random fixed coefficient vector checks the op's Jacobian-transpose
// product, which is exactly what backward computes.
class WeightedOutputSum final : public DifferentiableOp {
 public:
  WeightedOutputSum(DifferentiableOp& inner, Tensor coefficients);

  Tensor forward(const std::vector<Tensor>& inputs) override;
  std::vector<Tensor> backward(const Tensor& output_grad) override;

 private:
  DifferentiableOp& inner_;
  Tensor coefficients_;
  bool forward_ran_ = false;
};

}  // namespace fg
