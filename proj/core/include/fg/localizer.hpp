#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fg/backbone.hpp"
#include "fg/localization.hpp"
#include "fg/optimizer.hpp"

namespace fg {

class Rng;

// Lightweight heatmap predictor: a three-conv stack on a downsampled input
// producing a 1 x I x J map, trained to reproduce the frozen classifier's
// mean feature map. The first conv is copied from the classifier when the
// shapes line up, random otherwise.
class LocalizerNet {
 public:
  LocalizerNet() = default;
  LocalizerNet(std::size_t channels, std::size_t image_size,
               const LocalizationConfig& cfg, Rng& rng);

  // Copies conv1 weights from the classifier when shapes permit.
  static LocalizerNet distilled_from(const TinyBackbone& classifier,
                                     const LocalizationConfig& cfg, Rng& rng);

  // Full-resolution N x C x H x W batch in; downsampling happens inside.
  Tensor forward(const Tensor& images);
  void backward(const Tensor& grad_out);

  Heatmap predict(const Tensor& image);

  std::vector<Tensor*> parameters();
  std::vector<Tensor*> gradients();
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  void zero_grad();

  std::size_t heat_rows() const { return heat_rows_; }
  std::size_t heat_cols() const { return heat_cols_; }
  std::size_t input_resize() const { return input_resize_; }
  std::size_t image_size() const { return image_size_; }
  std::size_t channels() const { return channels_; }

 private:
  std::size_t channels_ = 0, image_size_ = 0, input_resize_ = 0,
              heat_rows_ = 0, heat_cols_ = 0;
  Conv2d conv1_, conv2_, conv3_;
  ReluLayer relu1_, relu2_;
};

struct LocalizerTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 14;
  SgdConfig sgd{0.01, 0.9, 0.0};
  LocalizationLoss loss = LocalizationLoss::kSmoothL1;
  std::uint64_t seed = 0;
};

struct LocalizerTrainResult {
  LocalizerNet net;
  std::vector<double> epoch_loss;
};

// Distillation targets: the frozen classifier's raw mean feature maps, one
// 1 x I x J tensor per image.
std::vector<Tensor> distillation_targets(const TinyBackbone& classifier,
                                         const std::vector<Tensor>& images);

// Trains the predictor against the frozen classifier's heatmaps. The
// classifier is const throughout; only the predictor moves.
LocalizerTrainResult train_localizer(const std::vector<Tensor>& images,
                                     const TinyBackbone& classifier,
                                     const LocalizationConfig& cfg,
                                     const LocalizerTrainOptions& opts);

}  // namespace fg
