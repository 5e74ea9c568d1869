#pragma once

#include <optional>
#include <vector>

#include "fg/diff.hpp"
#include "fg/tensor.hpp"

namespace fg {

// Output of the last convolutional stage: D feature maps of spatial size IxJ.
struct FeatureBlock {
  Tensor values;  // shape {D, I, J}

  explicit FeatureBlock(Tensor t);

  std::size_t maps() const { return values.dim(0); }
  std::size_t rows() const { return values.dim(1); }
  std::size_t cols() const { return values.dim(2); }
  std::size_t cells() const { return rows() * cols(); }

  std::span<const double> map(std::size_t d) const {
    return values.values().subspan(d * cells(), cells());
  }
};

struct PoolConfig {
  std::size_t k = 4;
  // Per-rank averaging weights w_1..w_K; absent for the plain variant.
  std::optional<std::vector<double>> weights;

  static PoolConfig plain(std::size_t k) { return PoolConfig{k, std::nullopt}; }
  static PoolConfig weighted(std::size_t k, std::vector<double> w) {
    return PoolConfig{k, std::move(w)};
  }
  // All-ones weights: behaves exactly like the unweighted pool until trained.
  static PoolConfig unit_weighted(std::size_t k) {
    return PoolConfig{k, std::vector<double>(k, 1.0)};
  }
};

// Per feature map, all I*J activations in descending order together with the
// flat spatial indices realizing them. Ties keep ascending spatial index so
// the selection (and therefore backward) is deterministic.
struct SortedActivations {
  std::size_t maps = 0;
  std::size_t cells = 0;
  std::vector<double> values;        // maps x cells, descending per map
  std::vector<std::size_t> indices;  // flat spatial index per entry
};

SortedActivations sort_activations(const FeatureBlock& block);

// Context captured by the forward pass for the matching backward call.
struct GkmpContext {
  std::size_t maps = 0, rows = 0, cols = 0, k = 0;
  std::vector<std::size_t> selected;  // maps x k flat spatial indices
  std::vector<double> top_values;     // maps x k activations, descending
  std::optional<std::vector<double>> weights;
};

// out[d] = (1/K) sum_k S_{d,k}. K=1 is global max pooling, K=I*J is global
// average pooling.
Tensor gkmp_forward(const FeatureBlock& block, const PoolConfig& cfg,
                    GkmpContext* ctx = nullptr);

// out[d] = (1/K) sum_k w_k * S_{d,k}; requires cfg.weights of length K.
Tensor gkmp_weighted_forward(const FeatureBlock& block, const PoolConfig& cfg,
                             GkmpContext* ctx = nullptr);

// Gradient with respect to the feature block: output_grad[d] * w_k / K at each
// selected position (w_k = 1 for the plain variant), zero elsewhere.
Tensor gkmp_backward(const GkmpContext& ctx, const Tensor& output_grad);

// Gradient with respect to the averaging weights:
// grad_w[k] = (1/K) sum_d output_grad[d] * S_{d,k}.
Tensor gkmp_weight_gradient(const GkmpContext& ctx, const Tensor& output_grad);

// DifferentiableOp views used by the gradient-check suites. Inputs:
//   plain:    { y (DxIxJ) }
//   weighted: { y (DxIxJ), w (K) }
class GkmpOp final : public DifferentiableOp {
 public:
  explicit GkmpOp(std::size_t k, bool weighted = false)
      : k_(k), weighted_(weighted) {}

  Tensor forward(const std::vector<Tensor>& inputs) override;
  std::vector<Tensor> backward(const Tensor& output_grad) override;

 private:
  std::size_t k_;
  bool weighted_;
  bool forward_ran_ = false;
  GkmpContext ctx_;
};

}  // namespace fg
