#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fg/config.hpp"
#include "fg/layers.hpp"
#include "fg/tensor.hpp"

namespace fg {

class Rng;

// Desk-scale classifier: three stride-2 conv stages ending in a D x I x J
// feature block, global (k-max) pooling, an l2-normalized embedding layer and
// a softmax classification layer reading the normalized embeddings.
class TinyBackbone {
 public:
  TinyBackbone() = default;
  TinyBackbone(const ExperimentConfig& cfg, Rng& rng);

  struct Activations {
    Tensor feature_block;  // N x D x I x J
    Tensor pooled;         // N x D
    Tensor embedding;      // N x E, unit rows
    Tensor logits;         // N x C
  };

  Activations forward(const Tensor& images);

  // Backpropagates the two loss heads: gradient at the logits (cross-entropy)
  // and gradient at the normalized embedding (embedding loss). Accumulates
  // parameter gradients.
  void backward(const Tensor& logits_grad, const Tensor& embedding_grad);

  std::vector<Tensor*> parameters();
  std::vector<Tensor*> gradients();
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  void zero_grad();

  PoolingMode pooling() const { return pool_.mode(); }
  void enable_weighted_pooling() { pool_.enable_weighted(); }
  const GkmpLayer& pool() const { return pool_; }
  const Conv2d& first_conv() const { return conv1_; }

  std::size_t image_size() const { return image_size_; }
  std::size_t channels() const { return channels_; }
  std::size_t feature_maps() const { return feature_maps_; }
  std::size_t feature_rows() const { return image_size_ / 8; }
  std::size_t feature_cols() const { return image_size_ / 8; }
  std::size_t embedding_dim() const { return embedding_dim_; }
  std::size_t class_count() const { return class_count_; }

 private:
  std::size_t image_size_ = 0, channels_ = 0, feature_maps_ = 0,
              embedding_dim_ = 0, class_count_ = 0;
  Conv2d conv1_, conv2_, conv3_;
  ReluLayer relu1_, relu2_, relu3_;
  GkmpLayer pool_;
  Linear embed_;
  L2NormalizeLayer norm_;
  Linear classifier_;
};

// Stacks sample images into an N x C x H x W batch tensor.
Tensor stack_images(const std::vector<Tensor>& images);

}  // namespace fg
