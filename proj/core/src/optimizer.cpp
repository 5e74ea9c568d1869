#include "fg/optimizer.hpp"

#include "fg/error.hpp"

namespace fg {

void sgd_step(Tensor& parameter, const Tensor& gradient, Tensor& velocity,
              const SgdConfig& cfg) {
  check_contract(parameter.same_shape(gradient), "gradient shape mismatch");
  if (!velocity.same_shape(parameter)) velocity = zeros_like(parameter);
  for (std::size_t i = 0; i < parameter.size(); ++i) {
    velocity[i] = cfg.momentum * velocity[i] + gradient[i] +
                  cfg.weight_decay * parameter[i];
    parameter[i] -= cfg.learning_rate * velocity[i];
  }
}

void SgdOptimizer::step(std::span<Tensor* const> parameters,
                        std::span<Tensor* const> gradients) {
  check_contract(parameters.size() == gradients.size(),
                 "parameter/gradient count mismatch");
  if (velocities_.size() < parameters.size()) {
    velocities_.resize(parameters.size());
  }
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    sgd_step(*parameters[i], *gradients[i], velocities_[i], cfg_);
  }
}

}  // namespace fg
