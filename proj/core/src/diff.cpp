#include "fg/diff.hpp"

#include <cmath>
#include <sstream>

#include "fg/error.hpp"

namespace fg {

namespace {

double scalar_output(DifferentiableOp& op, const std::vector<Tensor>& inputs) {
  const Tensor out = op.forward(inputs);
  check_contract(out.size() == 1,
                 "finite_difference_gradient requires a scalar-valued op");
  return out[0];
}

}  // namespace

std::vector<Tensor> finite_difference_gradient(DifferentiableOp& op,
                                               const std::vector<Tensor>& inputs,
                                               double epsilon) {
  check_config(epsilon > 0.0, "epsilon must be positive");
  scalar_output(op, inputs);  // validates the scalar contract up front

  std::vector<Tensor> grads;
  grads.reserve(inputs.size());
  std::vector<Tensor> probe = inputs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor g = zeros_like(inputs[t]);
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double original = probe[t][i];
      probe[t][i] = original + epsilon;
      const double plus = scalar_output(op, probe);
      probe[t][i] = original - epsilon;
      const double minus = scalar_output(op, probe);
      probe[t][i] = original;
      g[i] = (plus - minus) / (2.0 * epsilon);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

GradCheckResult check_gradients(DifferentiableOp& op,
                                const std::vector<Tensor>& inputs,
                                const GradCheckOptions& opts) {
  const Tensor out = op.forward(inputs);
  check_contract(out.size() == 1, "check_gradients requires a scalar-valued op");
  const std::vector<Tensor> analytic = op.backward(Tensor::scalar(1.0));
  check_contract(analytic.size() == inputs.size(),
                 "backward must return one gradient per input");

  const std::vector<Tensor> numeric =
      finite_difference_gradient(op, inputs, opts.epsilon);

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    check_contract(analytic[t].same_shape(inputs[t]),
                   "gradient shape must match input shape");
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double a = analytic[t][i];
      const double n = numeric[t][i];
      const double err = std::abs(a - n);
      const double bound = std::max(
          opts.absolute_floor,
          opts.relative_tolerance * std::max(std::abs(a), std::abs(n)));
      if (err > result.worst_error) {
        result.worst_error = err;
        result.worst_input = t;
        result.worst_element = i;
      }
      if (err > bound) {
        result.passed = false;
        std::ostringstream msg;
        msg << "input " << t << " element " << i << ": analytic " << a
            << " vs numeric " << n << " (|diff| " << err << " > " << bound
            << ")";
        if (result.detail.empty()) result.detail = msg.str();
      }
    }
  }
  return result;
}

WeightedOutputSum::WeightedOutputSum(DifferentiableOp& inner, Tensor coefficients)
    : inner_(inner), coefficients_(std::move(coefficients)) {}

Tensor WeightedOutputSum::forward(const std::vector<Tensor>& inputs) {
  const Tensor out = inner_.forward(inputs);
  check_contract(out.same_shape(coefficients_),
                 "coefficient shape must match the inner op output");
  forward_ran_ = true;
  return Tensor::scalar(dot(out, coefficients_));
}

std::vector<Tensor> WeightedOutputSum::backward(const Tensor& output_grad) {
  check_contract(forward_ran_, "backward called before forward");
  check_contract(output_grad.size() == 1, "output_grad must be scalar");
  Tensor upstream = coefficients_;
  upstream *= output_grad[0];
  return inner_.backward(upstream);
}

}  // namespace fg
