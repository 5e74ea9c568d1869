#include "fg/localizer.hpp"

#include <cmath>
#include <numeric>

#include "fg/error.hpp"
#include "fg/rng.hpp"

namespace fg {

LocalizerNet::LocalizerNet(std::size_t channels, std::size_t image_size,
                           const LocalizationConfig& cfg, Rng& rng)
    : channels_(channels),
      image_size_(image_size),
      input_resize_(cfg.input_resize) {
  cfg.validate();
  check_config(input_resize_ % 4 == 0,
               "predictor input resolution must be divisible by 4");
  heat_rows_ = heat_cols_ = input_resize_ / 4;
  const std::size_t hidden = cfg.predictor_channels;
  conv1_ = Conv2d(channels_, hidden, 3, 2, 1, rng);
  conv2_ = Conv2d(hidden, hidden, 3, 2, 1, rng);
  conv3_ = Conv2d(hidden, 1, 3, 1, 1, rng);
  // The readout starts at zero so the initial prediction sits at the
  // predict-zero baseline instead of random noise much larger than the
  // target heatmap scale.
  conv3_.weight().fill(0.0);
}

LocalizerNet LocalizerNet::distilled_from(const TinyBackbone& classifier,
                                          const LocalizationConfig& cfg,
                                          Rng& rng) {
  LocalizerNet net(classifier.channels(), classifier.image_size(), cfg, rng);
  check_config(net.heat_rows_ == classifier.feature_rows() &&
                   net.heat_cols_ == classifier.feature_cols(),
               "predictor output must match the classifier heatmap size; "
               "use input_resize = image_size / 2");
  // Warm start from the classifier's first conv when the shapes line up.
  const Conv2d& src = classifier.first_conv();
  if (src.weight().same_shape(net.conv1_.weight())) {
    net.conv1_.weight() = src.weight();
    net.conv1_.bias() = src.bias();
  }
  return net;
}

Tensor LocalizerNet::forward(const Tensor& images) {
  check_contract(images.rank() == 4 && images.dim(1) == channels_,
                 "localizer input must be N x C x H x W");
  // Bilinear downsample each image to the predictor resolution.
  const std::size_t n = images.dim(0);
  const std::size_t h = images.dim(2), w = images.dim(3);
  Tensor small({n, channels_, input_resize_, input_resize_});
  const std::size_t img_len = channels_ * h * w;
  const std::size_t small_len = channels_ * input_resize_ * input_resize_;
  for (std::size_t b = 0; b < n; ++b) {
    Tensor one({channels_, h, w},
               std::vector<double>(images.data() + b * img_len,
                                   images.data() + (b + 1) * img_len));
    const Tensor resized =
        crop_and_resize(one, BoundingBox::full_image(w, h), input_resize_,
                        input_resize_);
    for (std::size_t p = 0; p < small_len; ++p) small[b * small_len + p] = resized[p];
  }
  Tensor x = relu1_.forward(conv1_.forward(small));
  x = relu2_.forward(conv2_.forward(x));
  return conv3_.forward(x);
}

void LocalizerNet::backward(const Tensor& grad_out) {
  Tensor g = conv3_.backward(grad_out);
  g = conv2_.backward(relu2_.backward(g));
  conv1_.backward(relu1_.backward(g));
}

Heatmap LocalizerNet::predict(const Tensor& image) {
  check_contract(image.rank() == 3, "predict expects a single C x H x W image");
  Tensor batch({1, image.dim(0), image.dim(1), image.dim(2)},
               std::vector<double>(image.values().begin(), image.values().end()));
  Tensor out = forward(batch);
  return Heatmap(Tensor({1, heat_rows_, heat_cols_},
                        std::vector<double>(out.values().begin(),
                                            out.values().end())));
}

std::vector<Tensor*> LocalizerNet::parameters() {
  return {&conv1_.weight(), &conv1_.bias(), &conv2_.weight(), &conv2_.bias(),
          &conv3_.weight(), &conv3_.bias()};
}

std::vector<Tensor*> LocalizerNet::gradients() {
  return {&conv1_.weight_grad(), &conv1_.bias_grad(),
          &conv2_.weight_grad(), &conv2_.bias_grad(),
          &conv3_.weight_grad(), &conv3_.bias_grad()};
}

std::vector<std::pair<std::string, Tensor*>> LocalizerNet::named_parameters() {
  return {{"loc1.weight", &conv1_.weight()}, {"loc1.bias", &conv1_.bias()},
          {"loc2.weight", &conv2_.weight()}, {"loc2.bias", &conv2_.bias()},
          {"loc3.weight", &conv3_.weight()}, {"loc3.bias", &conv3_.bias()}};
}

void LocalizerNet::zero_grad() {
  conv1_.zero_grad();
  conv2_.zero_grad();
  conv3_.zero_grad();
}

std::vector<Tensor> distillation_targets(const TinyBackbone& classifier,
                                         const std::vector<Tensor>& images) {
  std::vector<Tensor> targets;
  targets.reserve(images.size());
  TinyBackbone frozen = classifier;  // forward caches stay off the caller's copy
  for (const auto& image : images) {
    const auto act = frozen.forward(stack_images({image}));
    FeatureBlock block(Tensor({frozen.feature_maps(), frozen.feature_rows(),
                               frozen.feature_cols()},
                              std::vector<double>(act.feature_block.values().begin(),
                                                  act.feature_block.values().end())));
    targets.push_back(heatmap_from_features(block).values);
  }
  return targets;
}

LocalizerTrainResult train_localizer(const std::vector<Tensor>& images,
                                     const TinyBackbone& classifier,
                                     const LocalizationConfig& cfg,
                                     const LocalizerTrainOptions& opts) {
  check_config(!images.empty(), "cannot train on an empty dataset");
  Rng rng(opts.seed);
  LocalizerTrainResult result;
  result.net = LocalizerNet::distilled_from(classifier, cfg, rng);

  const std::vector<Tensor> targets = distillation_targets(classifier, images);
  const std::size_t rows = result.net.heat_rows();
  const std::size_t cols = result.net.heat_cols();

  SgdOptimizer optimizer(opts.sgd);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng epoch_rng = rng.fork(epoch);
    epoch_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      std::vector<Tensor> batch_images;
      batch_images.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch_images.push_back(images[order[i]]);
      }
      const Tensor batch = stack_images(batch_images);
      const Tensor out = result.net.forward(batch);

      const std::size_t n = end - start;
      Tensor grad({n, 1, rows, cols});
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Heatmap predicted(Tensor({1, rows, cols},
                                 std::vector<double>(out.data() + i * rows * cols,
                                                     out.data() + (i + 1) * rows * cols)));
        Heatmap target(targets[order[start + i]]);
        Heatmap g(rows, cols);
        loss += opts.loss == LocalizationLoss::kSmoothL1
                    ? smooth_l1_loss(predicted, target, &g)
                    : mse_loss(predicted, target, &g);
        // Mean over the batch as well as over cells.
        for (std::size_t p = 0; p < rows * cols; ++p) {
          grad[i * rows * cols + p] = g.values[p] / static_cast<double>(n);
        }
      }
      loss /= static_cast<double>(n);
      check_contract(std::isfinite(loss), "localizer loss diverged");
      result.net.zero_grad();
      result.net.backward(grad);
      auto params = result.net.parameters();
      auto grads = result.net.gradients();
      optimizer.step(params, grads);
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

}  // namespace fg
