#pragma once

#include <span>
#include <vector>

#include "fg/tensor.hpp"

namespace fg {

struct SgdConfig {
  double learning_rate = 0.003;
  double momentum = 0.9;
  double weight_decay = 0.001;
};

// Classical momentum with loss-gradient-added weight decay:
//   v <- momentum * v + g + weight_decay * p;  p <- p - learning_rate * v.
void sgd_step(Tensor& parameter, const Tensor& gradient, Tensor& velocity,
              const SgdConfig& cfg);

// Holds one velocity buffer per parameter. Parameter identity is positional:
// pass the same parameter list in the same order every step.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {}

  void step(std::span<Tensor* const> parameters, std::span<Tensor* const> gradients);

  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  const SgdConfig& config() const { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<Tensor> velocities_;
};

}  // namespace fg
