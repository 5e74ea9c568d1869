#pragma once

#include <cstdint>
#include <string>

#include "fg/embedding.hpp"
#include "fg/localization.hpp"

namespace fg {

enum class PoolingMode { kGap, kGmp, kGkmp, kGkmpWeighted };

std::string to_string(PoolingMode mode);
PoolingMode pooling_mode_from_string(const std::string& name);

struct DatasetSpec {
  std::size_t classes = 5;
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 12;
  std::size_t image_size = 64;
  std::size_t channels = 1;
  // Object bounding-square side as a fraction of the image side.
  double object_scale_min = 0.40;
  double object_scale_max = 0.62;
  std::size_t distractors = 3;

  void validate() const;
  std::size_t train_count() const { return classes * train_per_class; }
  std::size_t test_count() const { return classes * test_per_class; }
};

// Every hyper-parameter of a run. Defaults: alpha 0.5, lambda 2.0, gamma
// 16.0, margin 0.75, K 4, tau 0.3, SGD with momentum 0.9, weight decay 1e-3,
// learning rate 3e-3 decayed by 10x after 30 epochs, batch size 14, and a
// 30-epoch weighted-average finetune.
struct ExperimentConfig {
  PoolingMode pooling = PoolingMode::kGkmp;
  std::size_t k = 4;
  EmbeddingLossConfig loss;  // lambda 2.0, gamma 16.0, margin 0.75
  double alpha = 0.5;

  std::size_t feature_maps = 32;  // D
  std::size_t embedding_dim = 64; // E
  std::size_t batch_size = 14;
  std::size_t epochs = 90;
  std::size_t finetune_epochs = 30;

  double learning_rate = 0.003;
  double lr_decay_factor = 0.1;
  std::size_t lr_decay_epoch = 30;
  double momentum = 0.9;
  double weight_decay = 0.001;

  LocalizationConfig localization;  // tau 0.3, 32x32 predictor input
  std::size_t localizer_epochs = 30;
  double localizer_learning_rate = 0.05;

  std::uint64_t seed = 0;
  DatasetSpec dataset;

  void validate() const;

  std::string to_json(int indent = -1) const;
  static ExperimentConfig from_json(const std::string& text);
};

}  // namespace fg
