#include "fg/backbone.hpp"

#include "fg/error.hpp"
#include "fg/rng.hpp"

namespace fg {

TinyBackbone::TinyBackbone(const ExperimentConfig& cfg, Rng& rng)
    : image_size_(cfg.dataset.image_size),
      channels_(cfg.dataset.channels),
      feature_maps_(cfg.feature_maps),
      embedding_dim_(cfg.embedding_dim),
      class_count_(cfg.dataset.classes) {
  check_config(image_size_ % 8 == 0,
               "image size must be divisible by 8 (three stride-2 stages)");
  conv1_ = Conv2d(channels_, 8, 3, 2, 1, rng);
  conv2_ = Conv2d(8, 16, 3, 2, 1, rng);
  conv3_ = Conv2d(16, feature_maps_, 3, 2, 1, rng);
  pool_ = GkmpLayer(cfg.pooling, cfg.k);
  embed_ = Linear(feature_maps_, embedding_dim_, rng);
  classifier_ = Linear(embedding_dim_, class_count_, rng);
}

TinyBackbone::Activations TinyBackbone::forward(const Tensor& images) {
  check_contract(images.rank() == 4 && images.dim(1) == channels_ &&
                     images.dim(2) == image_size_ && images.dim(3) == image_size_,
                 "backbone input must be N x C x H x W at the configured size");
  Activations act;
  Tensor x = relu1_.forward(conv1_.forward(images));
  x = relu2_.forward(conv2_.forward(x));
  act.feature_block = relu3_.forward(conv3_.forward(x));
  act.pooled = pool_.forward(act.feature_block);
  act.embedding = norm_.forward(embed_.forward(act.pooled));
  act.logits = classifier_.forward(act.embedding);
  return act;
}

void TinyBackbone::backward(const Tensor& logits_grad, const Tensor& embedding_grad) {
  Tensor f_grad = classifier_.backward(logits_grad);
  f_grad += embedding_grad;
  Tensor g = embed_.backward(norm_.backward(f_grad));
  g = pool_.backward(g);
  g = conv3_.backward(relu3_.backward(g));
  g = conv2_.backward(relu2_.backward(g));
  conv1_.backward(relu1_.backward(g));
}

std::vector<Tensor*> TinyBackbone::parameters() {
  std::vector<Tensor*> p{&conv1_.weight(), &conv1_.bias(),
                         &conv2_.weight(), &conv2_.bias(),
                         &conv3_.weight(), &conv3_.bias(),
                         &embed_.weight(), &embed_.bias(),
                         &classifier_.weight(), &classifier_.bias()};
  if (pool_.weighted()) p.push_back(&pool_.weights());
  return p;
}

std::vector<Tensor*> TinyBackbone::gradients() {
  std::vector<Tensor*> g{&conv1_.weight_grad(), &conv1_.bias_grad(),
                         &conv2_.weight_grad(), &conv2_.bias_grad(),
                         &conv3_.weight_grad(), &conv3_.bias_grad(),
                         &embed_.weight_grad(), &embed_.bias_grad(),
                         &classifier_.weight_grad(), &classifier_.bias_grad()};
  if (pool_.weighted()) g.push_back(&pool_.weight_grad());
  return g;
}

std::vector<std::pair<std::string, Tensor*>> TinyBackbone::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> p{
      {"conv1.weight", &conv1_.weight()}, {"conv1.bias", &conv1_.bias()},
      {"conv2.weight", &conv2_.weight()}, {"conv2.bias", &conv2_.bias()},
      {"conv3.weight", &conv3_.weight()}, {"conv3.bias", &conv3_.bias()},
      {"embed.weight", &embed_.weight()}, {"embed.bias", &embed_.bias()},
      {"classifier.weight", &classifier_.weight()},
      {"classifier.bias", &classifier_.bias()}};
  if (pool_.weighted()) p.emplace_back("pool.weights", &pool_.weights());
  return p;
}

void TinyBackbone::zero_grad() {
  conv1_.zero_grad();
  conv2_.zero_grad();
  conv3_.zero_grad();
  embed_.zero_grad();
  classifier_.zero_grad();
  pool_.zero_grad();
}

Tensor stack_images(const std::vector<Tensor>& images) {
  check_contract(!images.empty(), "cannot stack an empty batch");
  const auto& shape = images.front().shape();
  check_contract(shape.size() == 3, "images must be channels x H x W");
  Tensor batch({images.size(), shape[0], shape[1], shape[2]});
  const std::size_t len = images.front().size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    check_contract(images[i].shape() == shape, "mixed image shapes in batch");
    for (std::size_t p = 0; p < len; ++p) batch[i * len + p] = images[i][p];
  }
  return batch;
}

}  // namespace fg
