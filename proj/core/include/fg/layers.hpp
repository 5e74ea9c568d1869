#pragma once

#include <cstddef>
#include <vector>

#include "fg/config.hpp"
#include "fg/pooling.hpp"
#include "fg/tensor.hpp"

namespace fg {

class Rng;

// Minimal trainable layers for the desk-scale backbone. Each layer caches
// what its backward needs during forward; backward returns the input gradient
// and accumulates parameter gradients until zero_grad(). Plain value types so
// whole models copy (warm starts, checkpoints) without ceremony.

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t pad, Rng& rng);

  Tensor forward(const Tensor& input);  // N x Cin x H x W
  Tensor backward(const Tensor& grad_out);

  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& bias() const { return bias_; }
  Tensor& weight_grad() { return weight_grad_; }
  Tensor& bias_grad() { return bias_grad_; }
  void zero_grad();

  std::size_t out_channels() const { return out_channels_; }
  std::size_t stride() const { return stride_; }

 private:
  std::size_t in_channels_ = 0, out_channels_ = 0, kernel_ = 0, stride_ = 1,
              pad_ = 0;
  Tensor weight_, bias_, weight_grad_, bias_grad_;
  Tensor input_;
};

class ReluLayer {
 public:
  Tensor forward(const Tensor& input);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor input_;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor forward(const Tensor& input);  // N x in
  Tensor backward(const Tensor& grad_out);

  Tensor& weight() { return weight_; }  // out x in
  Tensor& bias() { return bias_; }
  Tensor& weight_grad() { return weight_grad_; }
  Tensor& bias_grad() { return bias_grad_; }
  void zero_grad();

 private:
  std::size_t in_features_ = 0, out_features_ = 0;
  Tensor weight_, bias_, weight_grad_, bias_grad_;
  Tensor input_;
};

// Row-wise l2 normalization of N x E activations.
class L2NormalizeLayer {
 public:
  Tensor forward(const Tensor& input);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor input_, output_;
};

// Batched global pooling over N x D x I x J blocks. GAP and GMP are the
// K = I*J and K = 1 special cases of the same k-max machinery, so all modes
// share one forward/backward path. The weighted variant owns the trainable
// per-rank weights.
class GkmpLayer {
 public:
  GkmpLayer() = default;
  GkmpLayer(PoolingMode mode, std::size_t k);

  Tensor forward(const Tensor& blocks);
  Tensor backward(const Tensor& grad_out);

  PoolingMode mode() const { return mode_; }
  std::size_t k() const { return k_; }

  // Switches GKMP to the weighted variant with all-ones weights, so the
  // model's behaviour is unchanged until the weights train away from 1.
  void enable_weighted();

  bool weighted() const { return mode_ == PoolingMode::kGkmpWeighted; }
  Tensor& weights() { return weights_; }
  const Tensor& weights() const { return weights_; }
  Tensor& weight_grad() { return weight_grad_; }
  void zero_grad();

 private:
  std::size_t effective_k(std::size_t cells) const;

  PoolingMode mode_ = PoolingMode::kGkmp;
  std::size_t k_ = 4;
  Tensor weights_, weight_grad_;
  std::vector<GkmpContext> contexts_;
  std::size_t batch_ = 0, maps_ = 0, rows_ = 0, cols_ = 0;
};

}  // namespace fg
