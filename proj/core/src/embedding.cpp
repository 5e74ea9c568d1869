#include "fg/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fg/error.hpp"

namespace fg {

void EmbeddingBatch::validate(std::size_t class_count) const {
  check_contract(features.rank() == 2, "batch features must be N x E");
  check_contract(labels.size() == features.dim(0),
                 "one label per batch sample required");
  check_contract(features.all_finite(), "batch features must be finite");
  for (int c : labels) {
    check_config(c >= 0 && static_cast<std::size_t>(c) < class_count,
                 "label out of range");
  }
}

bool EmbeddingBatch::rows_unit_norm(double tol) const {
  const std::size_t n = batch_size(), e = embedding_dim();
  for (std::size_t i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < e; ++j) {
      const double v = features[i * e + j];
      norm_sq += v * v;
    }
    if (std::abs(std::sqrt(norm_sq) - 1.0) > tol) return false;
  }
  return true;
}

ClassMeanStore::ClassMeanStore(std::size_t class_count, std::size_t embedding_dim,
                               double alpha_in)
    : means({class_count, embedding_dim}), alpha(alpha_in) {
  check_config(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
}

void EmbeddingLossConfig::validate() const {
  check_config(lambda >= 0.0, "lambda must be non-negative");
  check_config(gamma >= 0.0, "gamma must be non-negative");
  check_config(margin >= 0.0, "margin must be non-negative");
}

PairSet make_pair_set(const std::vector<int>& labels) {
  std::set<int> present(labels.begin(), labels.end());
  std::vector<int> classes(present.begin(), present.end());
  PairSet p;
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      p.pairs.emplace_back(classes[a], classes[b]);
    }
  }
  return p;
}

MeanUpdate update_means(const ClassMeanStore& store, const EmbeddingBatch& batch) {
  batch.validate(store.class_count());
  const std::size_t c_count = store.class_count();
  const std::size_t e = store.embedding_dim();
  check_contract(batch.embedding_dim() == e,
                 "batch embedding dimension must match the store");

  MeanUpdate result;
  result.store = store;
  result.store.iteration = store.iteration + 1;
  result.batch_counts.assign(c_count, 0);
  for (int c : batch.labels) ++result.batch_counts[static_cast<std::size_t>(c)];

  // delta_c = sum_{n: c_n=c} (mu_c - f_n) / (1 + count_c); absent classes have
  // an empty numerator and stay put.
  for (std::size_t c = 0; c < c_count; ++c) {
    const std::size_t count = result.batch_counts[c];
    if (count == 0) continue;
    const double scale = store.alpha / (1.0 + static_cast<double>(count));
    for (std::size_t j = 0; j < e; ++j) {
      double acc = 0.0;
      for (std::size_t n = 0; n < batch.batch_size(); ++n) {
        if (static_cast<std::size_t>(batch.labels[n]) != c) continue;
        acc += store.means[c * e + j] - batch.features[n * e + j];
      }
      result.store.means[c * e + j] -= scale * acc;
    }
  }
  return result;
}

double within_class_loss(const EmbeddingBatch& batch, const MeanUpdate& update) {
  const std::size_t n_count = batch.batch_size();
  const std::size_t e = batch.embedding_dim();
  double acc = 0.0;
  for (std::size_t n = 0; n < n_count; ++n) {
    const auto mu = update.store.mean(static_cast<std::size_t>(batch.labels[n]));
    for (std::size_t j = 0; j < e; ++j) {
      const double d = batch.features[n * e + j] - mu[j];
      acc += d * d;
    }
  }
  return acc / (2.0 * static_cast<double>(n_count));
}

double between_class_loss(const MeanUpdate& update, const PairSet& pairs,
                          const EmbeddingLossConfig& cfg) {
  if (pairs.empty()) return 0.0;
  const std::size_t e = update.store.embedding_dim();
  double acc = 0.0;
  for (const auto& [k, c] : pairs.pairs) {
    const auto mu_k = update.store.mean(static_cast<std::size_t>(k));
    const auto mu_c = update.store.mean(static_cast<std::size_t>(c));
    double dist_sq = 0.0;
    for (std::size_t j = 0; j < e; ++j) {
      const double d = mu_k[j] - mu_c[j];
      dist_sq += d * d;
    }
    const double hinge = std::max(cfg.margin - dist_sq, 0.0);
    acc += hinge * hinge;
  }
  return cfg.gamma / (4.0 * static_cast<double>(pairs.size())) * acc;
}

Tensor within_class_backward(const EmbeddingBatch& batch, const MeanUpdate& update) {
  const std::size_t n_count = batch.batch_size();
  const std::size_t e = batch.embedding_dim();
  const double inv_n = 1.0 / static_cast<double>(n_count);

  // Per class: residual_c = sum_{n: c_n=c} (f_n - mu_c).
  Tensor residual({update.store.class_count(), e});
  for (std::size_t n = 0; n < n_count; ++n) {
    const std::size_t c = static_cast<std::size_t>(batch.labels[n]);
    const auto mu = update.store.mean(c);
    for (std::size_t j = 0; j < e; ++j) {
      residual[c * e + j] += batch.features[n * e + j] - mu[j];
    }
  }

  // d/df_m = (1/N) [ (f_m - mu_c) - alpha/(1+count_c) * residual_c ]
  // The second term is the chain through mu_c's dependence on every class-c
  // sample in the batch.
  Tensor grad({n_count, e});
  for (std::size_t n = 0; n < n_count; ++n) {
    const std::size_t c = static_cast<std::size_t>(batch.labels[n]);
    const auto mu = update.store.mean(c);
    const double coupling =
        update.store.alpha / (1.0 + static_cast<double>(update.batch_counts[c]));
    for (std::size_t j = 0; j < e; ++j) {
      grad[n * e + j] = inv_n * (batch.features[n * e + j] - mu[j] -
                                 coupling * residual[c * e + j]);
    }
  }
  return grad;
}

Tensor between_class_backward(const EmbeddingBatch& batch, const MeanUpdate& update,
                              const PairSet& pairs, const EmbeddingLossConfig& cfg) {
  const std::size_t n_count = batch.batch_size();
  const std::size_t e = batch.embedding_dim();
  Tensor grad({n_count, e});
  if (pairs.empty()) return grad;

  // Accumulate dL_b/dmu_c. Active pairs contribute
  //   dL_b/dmu_k = -(gamma/|P|) (m - dist^2) (mu_k - mu_c)
  // and the opposite sign for mu_c. The (m - dist^2) factor grows as the
  // means approach, which is the point of squaring the hinge.
  Tensor mean_grad({update.store.class_count(), e});
  const double pair_scale = cfg.gamma / static_cast<double>(pairs.size());
  for (const auto& [k, c] : pairs.pairs) {
    const auto mu_k = update.store.mean(static_cast<std::size_t>(k));
    const auto mu_c = update.store.mean(static_cast<std::size_t>(c));
    double dist_sq = 0.0;
    for (std::size_t j = 0; j < e; ++j) {
      const double d = mu_k[j] - mu_c[j];
      dist_sq += d * d;
    }
    if (cfg.margin <= dist_sq) continue;  // hinge inactive
    const double factor = pair_scale * (cfg.margin - dist_sq);
    for (std::size_t j = 0; j < e; ++j) {
      const double diff = mu_k[j] - mu_c[j];
      mean_grad[static_cast<std::size_t>(k) * e + j] -= factor * diff;
      mean_grad[static_cast<std::size_t>(c) * e + j] += factor * diff;
    }
  }

  // Chain through the update: dmu_c/df_n = alpha/(1+count_c) for c = c_n.
  for (std::size_t n = 0; n < n_count; ++n) {
    const std::size_t c = static_cast<std::size_t>(batch.labels[n]);
    const double coupling =
        update.store.alpha / (1.0 + static_cast<double>(update.batch_counts[c]));
    for (std::size_t j = 0; j < e; ++j) {
      grad[n * e + j] = coupling * mean_grad[c * e + j];
    }
  }
  return grad;
}

Tensor embedding_loss_backward(const EmbeddingBatch& batch, const MeanUpdate& update,
                               const PairSet& pairs, const EmbeddingLossConfig& cfg) {
  Tensor grad = within_class_backward(batch, update);
  grad += between_class_backward(batch, update, pairs, cfg);
  return grad;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* logits_grad) {
  check_contract(logits.rank() == 2, "logits must be N x C");
  const std::size_t n_count = logits.dim(0);
  const std::size_t c_count = logits.dim(1);
  check_contract(labels.size() == n_count, "one label per row required");

  if (logits_grad) *logits_grad = Tensor({n_count, c_count});
  const double inv_n = 1.0 / static_cast<double>(n_count);
  double loss = 0.0;
  for (std::size_t n = 0; n < n_count; ++n) {
    const std::size_t label = static_cast<std::size_t>(labels[n]);
    check_config(label < c_count, "label out of range");
    double max_logit = logits[n * c_count];
    for (std::size_t c = 1; c < c_count; ++c) {
      max_logit = std::max(max_logit, logits[n * c_count + c]);
    }
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) {
      sum_exp += std::exp(logits[n * c_count + c] - max_logit);
    }
    const double log_sum = max_logit + std::log(sum_exp);
    loss += log_sum - logits[n * c_count + label];
    if (logits_grad) {
      for (std::size_t c = 0; c < c_count; ++c) {
        const double p = std::exp(logits[n * c_count + c] - log_sum);
        (*logits_grad)[n * c_count + c] =
            inv_n * (p - (c == label ? 1.0 : 0.0));
      }
    }
  }
  return loss * inv_n;
}

double joint_loss(const Tensor& logits, const std::vector<int>& labels,
                  double within_loss, double between_loss,
                  const EmbeddingLossConfig& cfg) {
  return softmax_cross_entropy(logits, labels) +
         cfg.lambda * (within_loss + between_loss);
}

EmbeddingLossOp::EmbeddingLossOp(ClassMeanStore previous, std::vector<int> labels,
                                 EmbeddingLossConfig cfg, Term term)
    : previous_(std::move(previous)),
      labels_(std::move(labels)),
      cfg_(cfg),
      term_(term) {
  cfg_.validate();
}

Tensor EmbeddingLossOp::forward(const std::vector<Tensor>& inputs) {
  check_contract(inputs.size() == 1, "EmbeddingLossOp expects {features}");
  batch_ = EmbeddingBatch{inputs[0], labels_};
  update_ = update_means(previous_, batch_);
  pairs_ = make_pair_set(labels_);
  double loss = 0.0;
  if (term_ != Term::kBetween) loss += within_class_loss(batch_, update_);
  if (term_ != Term::kWithin) loss += between_class_loss(update_, pairs_, cfg_);
  forward_ran_ = true;
  return Tensor::scalar(loss);
}

std::vector<Tensor> EmbeddingLossOp::backward(const Tensor& output_grad) {
  check_contract(forward_ran_, "backward called before forward");
  check_contract(output_grad.size() == 1, "output_grad must be scalar");
  Tensor grad({batch_.batch_size(), batch_.embedding_dim()});
  if (term_ != Term::kBetween) grad += within_class_backward(batch_, update_);
  if (term_ != Term::kWithin) {
    grad += between_class_backward(batch_, update_, pairs_, cfg_);
  }
  grad *= output_grad[0];
  return {std::move(grad)};
}

JointLossOp::JointLossOp(ClassMeanStore previous, std::vector<int> labels,
                         EmbeddingLossConfig cfg)
    : previous_(std::move(previous)), labels_(std::move(labels)), cfg_(cfg) {
  cfg_.validate();
}

Tensor JointLossOp::forward(const std::vector<Tensor>& inputs) {
  check_contract(inputs.size() == 3, "JointLossOp expects {raw, W, b}");
  raw_ = inputs[0];
  weight_ = inputs[1];
  const Tensor& weight = weight_;
  const Tensor& bias = inputs[2];
  const std::size_t n_count = raw_.dim(0);
  const std::size_t e = raw_.dim(1);
  const std::size_t c_count = weight.dim(0);
  check_contract(weight.dim(1) == e && bias.size() == c_count,
                 "classifier shapes must be W: CxE, b: C");

  normalized_ = l2_normalize(raw_, 1);
  logits_ = Tensor({n_count, c_count});
  for (std::size_t n = 0; n < n_count; ++n) {
    for (std::size_t c = 0; c < c_count; ++c) {
      double acc = bias[c];
      for (std::size_t j = 0; j < e; ++j) {
        acc += normalized_[n * e + j] * weight[c * e + j];
      }
      logits_[n * c_count + c] = acc;
    }
  }

  batch_ = EmbeddingBatch{normalized_, labels_};
  update_ = update_means(previous_, batch_);
  pairs_ = make_pair_set(labels_);
  const double loss =
      joint_loss(logits_, labels_, within_class_loss(batch_, update_),
                 between_class_loss(update_, pairs_, cfg_), cfg_);
  forward_ran_ = true;
  return Tensor::scalar(loss);
}

std::vector<Tensor> JointLossOp::backward(const Tensor& output_grad) {
  check_contract(forward_ran_, "backward called before forward");
  check_contract(output_grad.size() == 1, "output_grad must be scalar");
  const std::size_t n_count = raw_.dim(0);
  const std::size_t e = raw_.dim(1);
  const std::size_t c_count = logits_.dim(1);
  const Tensor& weight = weight_;

  Tensor logits_grad;
  softmax_cross_entropy(logits_, labels_, &logits_grad);

  // CE path: d/df = logits_grad . W, plus parameter gradients.
  Tensor f_grad({n_count, e});
  Tensor w_grad({c_count, e});
  Tensor b_grad({c_count});
  for (std::size_t n = 0; n < n_count; ++n) {
    for (std::size_t c = 0; c < c_count; ++c) {
      const double g = logits_grad[n * c_count + c];
      b_grad[c] += g;
      for (std::size_t j = 0; j < e; ++j) {
        f_grad[n * e + j] += g * weight[c * e + j];
        w_grad[c * e + j] += g * normalized_[n * e + j];
      }
    }
  }

  // Embedding-loss path, also expressed at f.
  Tensor emb_grad = embedding_loss_backward(batch_, update_, pairs_, cfg_);
  emb_grad *= cfg_.lambda;
  f_grad += emb_grad;

  Tensor raw_grad = l2_normalize_backward(raw_, normalized_, f_grad, 1);
  raw_grad *= output_grad[0];
  w_grad *= output_grad[0];
  b_grad *= output_grad[0];
  return {std::move(raw_grad), std::move(w_grad), std::move(b_grad)};
}

}  // namespace fg
