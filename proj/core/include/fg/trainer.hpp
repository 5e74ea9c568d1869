#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fg/backbone.hpp"
#include "fg/checkpoint.hpp"
#include "fg/dataset.hpp"
#include "fg/localizer.hpp"

namespace fg {

struct EpochMetrics {
  std::size_t epoch = 0;
  double cross_entropy = 0.0;
  double within_loss = 0.0;
  double between_loss = 0.0;
  double total_loss = 0.0;
  double train_accuracy = 0.0;

  std::string to_json() const;
};

struct TrainOptions {
  std::filesystem::path metrics_path;  // per-epoch JSONL when non-empty
  std::ostream* log = nullptr;
};

struct TrainResult {
  TinyBackbone model;
  ClassMeanStore store;
  std::vector<EpochMetrics> trace;
};

// Stage 1: joint training of the classifier under CE + lambda (L_w + L_b)
// with SGD momentum and the single-step learning-rate decay. Deterministic
// given cfg.seed; aborts with TrainingDiverged on a non-finite loss.
TrainResult train_classifier(const ExperimentConfig& cfg,
                             const std::vector<SyntheticSample>& train_set,
                             const TrainOptions& opts = {});
// Convenience overload that renders the dataset from cfg.dataset + cfg.seed.
TrainResult train_classifier(const ExperimentConfig& cfg,
                             const TrainOptions& opts = {});

// Stage 2: switches GKMP to the weighted variant (w = ones, so the model is
// bit-identical until the first step) and continues training for
// cfg.finetune_epochs at the post-decay learning rate.
void finetune_weighted_average(TrainResult& result, const ExperimentConfig& cfg,
                               const std::vector<SyntheticSample>& train_set,
                               const TrainOptions& opts = {});

// Where evaluation boxes come from.
enum class BoxSource { kFullImage, kLocalizer, kTruth };

struct PipelineMetrics {
  double accuracy = 0.0;
  double iou_at_05 = 0.0;
  double mean_iou = 0.0;
  std::vector<BoundingBox> boxes;

  std::string to_json() const;
};

// Stage 4: per sample, obtain a box, crop, resize to the model input and
// classify. Reports accuracy plus IoU metrics of the boxes against truth.
PipelineMetrics evaluate_pipeline(TinyBackbone& model, LocalizerNet* localizer,
                                  const std::vector<SyntheticSample>& test_set,
                                  const LocalizationConfig& loc_cfg,
                                  BoxSource source);

double plain_accuracy(TinyBackbone& model,
                      const std::vector<SyntheticSample>& samples,
                      std::size_t batch_size = 32);

// One ablation cell: a full config plus the two pipeline toggles.
struct AblationCell {
  std::string name;
  ExperimentConfig config;
  bool weighted_finetune = false;
  bool use_localizer = false;
};

struct AblationRow {
  AblationCell cell;
  bool ok = false;
  std::string error;
  double test_accuracy = 0.0;
  double iou_at_05 = 0.0;
  double mean_iou = 0.0;
  double final_train_loss = 0.0;
};

// Rows mirroring the pooling/loss/localizer/weighted-average ablation:
// GAP and GMP baselines, plain GKMP, GKMP+localizer, within-only loss, full
// loss, and the full pipeline with and without the weighted finetune.
std::vector<AblationCell> ablation_table_preset(const ExperimentConfig& base);

// One cell per K, GKMP with the full loss. Pass k = I*J for the GAP limit.
std::vector<AblationCell> k_sweep_preset(const ExperimentConfig& base,
                                         const std::vector<std::size_t>& ks);

// Runs every cell, catching per-cell failures so the grid always completes.
std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid,
                                      std::ostream* log = nullptr);

void write_ablation_csv(const std::filesystem::path& path,
                        const std::vector<AblationRow>& rows);
void write_ablation_json(const std::filesystem::path& path,
                         const std::vector<AblationRow>& rows);

}  // namespace fg
