#pragma once

#include <utility>
#include <vector>

#include "fg/diff.hpp"
#include "fg/tensor.hpp"

namespace fg {

// One training batch at the embedding layer: N l2-normalized embeddings and
// their class labels (0-based).
struct EmbeddingBatch {
  Tensor features;          // N x E
  std::vector<int> labels;  // size N

  std::size_t batch_size() const { return features.dim(0); }
  std::size_t embedding_dim() const { return features.dim(1); }

  // Shape/label sanity. Unit-norm rows are a property of the training path
  // (the backbone normalizes); gradient probes intentionally perturb off the
  // sphere, so the norm check is separate.
  void validate(std::size_t class_count) const;
  bool rows_unit_norm(double tol = 1e-9) const;
};

// Per-class embedding means, updated online once per training step.
struct ClassMeanStore {
  Tensor means;   // C x E
  double alpha = 0.5;
  std::size_t iteration = 0;

  ClassMeanStore() = default;
  ClassMeanStore(std::size_t class_count, std::size_t embedding_dim,
                 double alpha);

  std::size_t class_count() const { return means.dim(0); }
  std::size_t embedding_dim() const { return means.dim(1); }

  std::span<const double> mean(std::size_t c) const {
    return means.values().subspan(c * embedding_dim(), embedding_dim());
  }
};

struct EmbeddingLossConfig {
  double lambda = 2.0;  // joint-loss weight on the embedding term
  double gamma = 16.0;  // between-class contribution
  double margin = 0.75; // squared-distance threshold below which means repel

  void validate() const;
};

// All unordered pairs of distinct classes present in the current batch.
struct PairSet {
  std::vector<std::pair<int, int>> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

PairSet make_pair_set(const std::vector<int>& labels);

// Result of one online mean update. batch_counts holds the number of batch
// samples per class; together with alpha it fixes the within-step dependence
// of the updated means on the batch features, which backward has to chain
// through.
struct MeanUpdate {
  ClassMeanStore store;                   // means after the update
  std::vector<std::size_t> batch_counts;  // size C
};

// mu_c <- mu_c - alpha * (sum_{n: c_n=c}(mu_c - f_n)) / (1 + count_c).
// Classes absent from the batch keep their mean. The iteration counter
// advances by one.
MeanUpdate update_means(const ClassMeanStore& store, const EmbeddingBatch& batch);

// L_w = (1/2N) sum_n |f_n - mu_{c_n}|^2, with the already-updated means.
double within_class_loss(const EmbeddingBatch& batch, const MeanUpdate& update);

// L_b = (gamma / 4|P|) sum_{(k,c) in P} max(m - |mu_k - mu_c|^2, 0)^2.
// An empty pair set (single-class batch) yields 0.
double between_class_loss(const MeanUpdate& update, const PairSet& pairs,
                          const EmbeddingLossConfig& cfg);

// Exact gradients of the two loss terms with respect to the batch features,
// including the path through the mean update. The squared hinge makes the
// between-class gradient carry the factor (m - |mu_k - mu_c|^2), so pairs
// with close means push harder.
Tensor within_class_backward(const EmbeddingBatch& batch, const MeanUpdate& update);
Tensor between_class_backward(const EmbeddingBatch& batch, const MeanUpdate& update,
                              const PairSet& pairs, const EmbeddingLossConfig& cfg);
Tensor embedding_loss_backward(const EmbeddingBatch& batch, const MeanUpdate& update,
                               const PairSet& pairs, const EmbeddingLossConfig& cfg);

// Mean softmax cross-entropy over the batch; optionally writes the gradient
// with respect to the logits.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* logits_grad = nullptr);

// L = L_CE + lambda * (L_w + L_b).
double joint_loss(const Tensor& logits, const std::vector<int>& labels,
                  double within_loss, double between_loss,
                  const EmbeddingLossConfig& cfg);

// Scalar-valued op over the batch features: runs the mean update and returns
// the selected combination of loss terms. Used by the gradient suites to
// difference the whole composition update_means ∘ loss as one function of f.
class EmbeddingLossOp final : public DifferentiableOp {
 public:
  enum class Term { kWithin, kBetween, kBoth };

  EmbeddingLossOp(ClassMeanStore previous, std::vector<int> labels,
                  EmbeddingLossConfig cfg, Term term = Term::kBoth);

  Tensor forward(const std::vector<Tensor>& inputs) override;
  std::vector<Tensor> backward(const Tensor& output_grad) override;

 private:
  ClassMeanStore previous_;
  std::vector<int> labels_;
  EmbeddingLossConfig cfg_;
  Term term_;
  bool forward_ran_ = false;
  EmbeddingBatch batch_;
  MeanUpdate update_;
  PairSet pairs_;
};

// Scalar-valued op for the full training objective as seen from the raw
// (pre-normalization) embedding layer output:
//   f = l2_normalize(raw); logits = f W^T + b; L = CE + lambda (L_w + L_b).
// Inputs: { raw (N x E), W (C x E), b (C) }.
class JointLossOp final : public DifferentiableOp {
 public:
  JointLossOp(ClassMeanStore previous, std::vector<int> labels,
              EmbeddingLossConfig cfg);

  Tensor forward(const std::vector<Tensor>& inputs) override;
  std::vector<Tensor> backward(const Tensor& output_grad) override;

 private:
  ClassMeanStore previous_;
  std::vector<int> labels_;
  EmbeddingLossConfig cfg_;
  bool forward_ran_ = false;
  Tensor raw_, weight_, normalized_, logits_;
  EmbeddingBatch batch_;
  MeanUpdate update_;
  PairSet pairs_;
};

}  // namespace fg
