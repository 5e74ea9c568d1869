#include "fg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "fg/error.hpp"
#include "fg/optimizer.hpp"
#include "fg/rng.hpp"

namespace fg {

using nlohmann::json;

std::string EpochMetrics::to_json() const {
  return json{{"epoch", epoch},
              {"ce", cross_entropy},
              {"lw", within_loss},
              {"lb", between_loss},
              {"loss", total_loss},
              {"train_accuracy", train_accuracy}}
      .dump();
}

std::string PipelineMetrics::to_json() const {
  json box_rows = json::array();
  for (const auto& b : boxes) {
    box_rows.push_back({static_cast<long long>(std::llround(b.x_min)),
                        static_cast<long long>(std::llround(b.y_min)),
                        static_cast<long long>(std::llround(b.x_max)),
                        static_cast<long long>(std::llround(b.y_max))});
  }
  return json{{"accuracy", accuracy},
              {"iou_at_05", iou_at_05},
              {"mean_iou", mean_iou},
              {"boxes", box_rows}}
      .dump();
}

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t c_count = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < c_count; ++c) {
    if (logits[row * c_count + c] > logits[row * c_count + best]) best = c;
  }
  return best;
}

struct EpochAccumulator {
  double ce = 0.0, lw = 0.0, lb = 0.0, total = 0.0;
  std::size_t correct = 0, samples = 0, batches = 0;

  EpochMetrics finalize(std::size_t epoch) const {
    EpochMetrics m;
    m.epoch = epoch;
    const double inv_b = batches ? 1.0 / static_cast<double>(batches) : 0.0;
    m.cross_entropy = ce * inv_b;
    m.within_loss = lw * inv_b;
    m.between_loss = lb * inv_b;
    m.total_loss = total * inv_b;
    m.train_accuracy =
        samples ? static_cast<double>(correct) / static_cast<double>(samples) : 0.0;
    return m;
  }
};

class MetricsWriter {
 public:
  MetricsWriter(const TrainOptions& opts, bool append)
      : log_(opts.log) {
    if (!opts.metrics_path.empty()) {
      file_.open(opts.metrics_path, append ? std::ios::app : std::ios::out);
      check_config(file_.good(),
                   "cannot open metrics file: " + opts.metrics_path.string());
    }
  }

  void write(const EpochMetrics& m, const char* stage) {
    if (file_.is_open()) file_ << m.to_json() << "\n";
    if (log_) {
      (*log_) << stage << " epoch " << m.epoch << " loss " << m.total_loss
              << " acc " << m.train_accuracy << "\n";
    }
  }

 private:
  std::ofstream file_;
  std::ostream* log_;
};

// Runs `epochs` epochs of joint training on top of the given model/store.
// epoch_base distinguishes stage-1 epochs from finetune epochs in both the
// shuffle streams and the metric trace.
void run_training_epochs(TinyBackbone& model, ClassMeanStore& store,
                         const ExperimentConfig& cfg,
                         const std::vector<SyntheticSample>& train_set,
                         std::size_t epochs, std::size_t epoch_base,
                         double fixed_lr, bool use_fixed_lr,
                         std::vector<EpochMetrics>& trace, MetricsWriter& writer,
                         const char* stage) {
  check_config(!train_set.empty(), "training set is empty");
  SgdOptimizer optimizer(
      SgdConfig{cfg.learning_rate, cfg.momentum, cfg.weight_decay});
  Rng run_rng = Rng(cfg.seed).fork(epoch_base);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::size_t global_epoch = epoch_base + epoch;
    const double lr = use_fixed_lr
                          ? fixed_lr
                          : (epoch < cfg.lr_decay_epoch
                                 ? cfg.learning_rate
                                 : cfg.learning_rate * cfg.lr_decay_factor);
    optimizer.set_learning_rate(lr);

    Rng epoch_rng = run_rng.fork(epoch);
    epoch_rng.shuffle(order);

    EpochAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> images;
      std::vector<int> labels;
      images.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(train_set[order[i]].image);
        labels.push_back(train_set[order[i]].label);
      }
      const Tensor batch = stack_images(images);
      const auto act = model.forward(batch);
      if (!act.logits.all_finite() || !act.embedding.all_finite()) {
        throw TrainingDiverged("non-finite activations at epoch " +
                               std::to_string(global_epoch));
      }

      EmbeddingBatch emb{act.embedding, labels};
      const MeanUpdate update = update_means(store, emb);
      const PairSet pairs = make_pair_set(labels);
      const double lw = within_class_loss(emb, update);
      const double lb = between_class_loss(update, pairs, cfg.loss);
      Tensor logits_grad;
      const double ce = softmax_cross_entropy(act.logits, labels, &logits_grad);
      const double total = ce + cfg.loss.lambda * (lw + lb);
      if (!std::isfinite(total)) {
        throw TrainingDiverged("non-finite loss at epoch " +
                               std::to_string(global_epoch));
      }

      Tensor emb_grad = embedding_loss_backward(emb, update, pairs, cfg.loss);
      emb_grad *= cfg.loss.lambda;

      model.zero_grad();
      model.backward(logits_grad, emb_grad);
      const auto params = model.parameters();
      const auto grads = model.gradients();
      optimizer.step(params, grads);
      store = update.store;

      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (argmax_row(act.logits, i) == static_cast<std::size_t>(labels[i])) {
          ++acc.correct;
        }
      }
      acc.samples += labels.size();
      acc.ce += ce;
      acc.lw += lw;
      acc.lb += lb;
      acc.total += total;
      ++acc.batches;
    }
    const EpochMetrics metrics = acc.finalize(global_epoch);
    trace.push_back(metrics);
    writer.write(metrics, stage);
  }
}

}  // namespace

TrainResult train_classifier(const ExperimentConfig& cfg,
                             const std::vector<SyntheticSample>& train_set,
                             const TrainOptions& opts) {
  cfg.validate();
  TrainResult result;
  Rng init_rng = Rng(cfg.seed).fork(0xf17);
  result.model = TinyBackbone(cfg, init_rng);
  // Means start at zero; the first update pulls each touched mean toward its
  // batch features regardless of the start.
  result.store = ClassMeanStore(cfg.dataset.classes, cfg.embedding_dim, cfg.alpha);

  MetricsWriter writer(opts, /*append=*/false);
  run_training_epochs(result.model, result.store, cfg, train_set, cfg.epochs,
                      0, 0.0, false, result.trace, writer, "train");
  return result;
}

TrainResult train_classifier(const ExperimentConfig& cfg, const TrainOptions& opts) {
  return train_classifier(cfg, generate_dataset(cfg.dataset, cfg.seed), opts);
}

void finetune_weighted_average(TrainResult& result, const ExperimentConfig& cfg,
                               const std::vector<SyntheticSample>& train_set,
                               const TrainOptions& opts) {
  check_config(result.model.pooling() == PoolingMode::kGkmp,
               "weighted-average finetuning requires a GKMP model");
  result.model.enable_weighted_pooling();
  // The finetune stage runs at the post-decay rate.
  const double lr = cfg.learning_rate * cfg.lr_decay_factor;
  MetricsWriter writer(opts, /*append=*/true);
  run_training_epochs(result.model, result.store, cfg, train_set,
                      cfg.finetune_epochs, cfg.epochs, lr, true, result.trace,
                      writer, "finetune");
}

PipelineMetrics evaluate_pipeline(TinyBackbone& model, LocalizerNet* localizer,
                                  const std::vector<SyntheticSample>& test_set,
                                  const LocalizationConfig& loc_cfg,
                                  BoxSource source) {
  check_config(source != BoxSource::kLocalizer || localizer != nullptr,
               "localizer evaluation requested without a localizer");
  PipelineMetrics metrics;
  if (test_set.empty()) return metrics;

  const std::size_t size = model.image_size();
  std::vector<BoundingBox> truth;
  std::size_t correct = 0;
  double iou_sum = 0.0;
  for (const auto& sample : test_set) {
    BoundingBox box;
    switch (source) {
      case BoxSource::kFullImage:
        box = BoundingBox::full_image(size, size);
        break;
      case BoxSource::kTruth:
        box = sample.truth_box;
        break;
      case BoxSource::kLocalizer: {
        const Heatmap heat = localizer->predict(sample.image);
        box = extract_bbox(minmax_normalize(heat), loc_cfg, size, size);
        break;
      }
    }
    const Tensor cropped = crop_and_resize(sample.image, box, size, size);
    const auto act = model.forward(stack_images({cropped}));
    if (argmax_row(act.logits, 0) == static_cast<std::size_t>(sample.label)) {
      ++correct;
    }
    metrics.boxes.push_back(box);
    truth.push_back(sample.truth_box);
    iou_sum += iou(box, sample.truth_box);
  }
  metrics.accuracy =
      static_cast<double>(correct) / static_cast<double>(test_set.size());
  metrics.iou_at_05 = localization_accuracy(metrics.boxes, truth);
  metrics.mean_iou = iou_sum / static_cast<double>(test_set.size());
  return metrics;
}

double plain_accuracy(TinyBackbone& model,
                      const std::vector<SyntheticSample>& samples,
                      std::size_t batch_size) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<Tensor> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(samples[i].image);
    const auto act = model.forward(stack_images(images));
    for (std::size_t i = start; i < end; ++i) {
      if (argmax_row(act.logits, i - start) ==
          static_cast<std::size_t>(samples[i].label)) {
        ++correct;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::vector<AblationCell> ablation_table_preset(const ExperimentConfig& base) {
  std::vector<AblationCell> grid;
  const auto cell = [&](std::string name, PoolingMode mode, double lambda,
                        double gamma, bool localizer, bool weighted) {
    AblationCell c;
    c.name = std::move(name);
    c.config = base;
    c.config.pooling = mode;
    c.config.loss.lambda = lambda;
    c.config.loss.gamma = gamma;
    c.use_localizer = localizer;
    c.weighted_finetune = weighted;
    grid.push_back(std::move(c));
  };
  cell("GAP", PoolingMode::kGap, 0.0, base.loss.gamma, false, false);
  cell("GMP", PoolingMode::kGmp, 0.0, base.loss.gamma, false, false);
  cell("GKMP", PoolingMode::kGkmp, 0.0, base.loss.gamma, false, false);
  cell("GKMP+loc", PoolingMode::kGkmp, 0.0, base.loss.gamma, true, false);
  cell("GKMP+Lw", PoolingMode::kGkmp, base.loss.lambda, 0.0, false, false);
  cell("GKMP+LwLb", PoolingMode::kGkmp, base.loss.lambda, base.loss.gamma, false,
       false);
  cell("GKMP+LwLb+loc", PoolingMode::kGkmp, base.loss.lambda, base.loss.gamma,
       true, false);
  cell("GKMP+LwLb+loc+wavg", PoolingMode::kGkmp, base.loss.lambda,
       base.loss.gamma, true, true);
  return grid;
}

std::vector<AblationCell> k_sweep_preset(const ExperimentConfig& base,
                                         const std::vector<std::size_t>& ks) {
  std::vector<AblationCell> grid;
  for (std::size_t k : ks) {
    AblationCell c;
    c.name = "K=" + std::to_string(k);
    c.config = base;
    c.config.pooling = PoolingMode::kGkmp;
    c.config.k = k;
    grid.push_back(std::move(c));
  }
  return grid;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid,
                                      std::ostream* log) {
  std::vector<AblationRow> rows;
  for (const auto& cell : grid) {
    AblationRow row;
    row.cell = cell;
    if (log) (*log) << "[ablate] " << cell.name << "\n";
    try {
      const auto train_set = generate_dataset(cell.config.dataset, cell.config.seed);
      const auto test_set =
          generate_dataset(cell.config.dataset, cell.config.seed, true);
      TrainOptions opts;
      opts.log = nullptr;
      TrainResult result = train_classifier(cell.config, train_set, opts);
      if (cell.weighted_finetune) {
        finetune_weighted_average(result, cell.config, train_set, opts);
      }
      LocalizerNet localizer;
      if (cell.use_localizer) {
        std::vector<Tensor> images;
        for (const auto& s : train_set) images.push_back(s.image);
        LocalizerTrainOptions loc_opts;
        loc_opts.epochs = cell.config.localizer_epochs;
        loc_opts.batch_size = cell.config.batch_size;
        loc_opts.sgd = SgdConfig{cell.config.localizer_learning_rate,
                                 cell.config.momentum, 0.0};
        loc_opts.loss = cell.config.localization.loss;
        loc_opts.seed = cell.config.seed + 1;
        localizer =
            train_localizer(images, result.model, cell.config.localization, loc_opts)
                .net;
      }
      const PipelineMetrics metrics = evaluate_pipeline(
          result.model, cell.use_localizer ? &localizer : nullptr, test_set,
          cell.config.localization,
          cell.use_localizer ? BoxSource::kLocalizer : BoxSource::kFullImage);
      row.ok = true;
      row.test_accuracy = metrics.accuracy;
      row.iou_at_05 = metrics.iou_at_05;
      row.mean_iou = metrics.mean_iou;
      row.final_train_loss =
          result.trace.empty() ? 0.0 : result.trace.back().total_loss;
      if (log) {
        (*log) << "[ablate] " << cell.name << " accuracy " << metrics.accuracy
               << "\n";
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      if (log) (*log) << "[ablate] " << cell.name << " FAILED: " << e.what() << "\n";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json row_to_json(const AblationRow& row) {
  json j;
  j["name"] = row.cell.name;
  j["ok"] = row.ok;
  if (!row.ok) j["error"] = row.error;
  j["weighted_finetune"] = row.cell.weighted_finetune;
  j["use_localizer"] = row.cell.use_localizer;
  j["test_accuracy"] = row.test_accuracy;
  j["iou_at_05"] = row.iou_at_05;
  j["mean_iou"] = row.mean_iou;
  j["final_train_loss"] = row.final_train_loss;
  j["config"] = json::parse(row.cell.config.to_json());
  return j;
}

}  // namespace

void write_ablation_csv(const std::filesystem::path& path,
                        const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  check_config(out.good(), "cannot write ablation CSV: " + path.string());
  out << "name,ok,error,pooling,k,lambda,gamma,margin,alpha,tau,embedding_dim,"
         "batch_size,epochs,finetune_epochs,learning_rate,momentum,weight_decay,"
         "seed,weighted_finetune,use_localizer,test_accuracy,iou_at_05,mean_iou,"
         "final_train_loss\n";
  for (const auto& row : rows) {
    const auto& c = row.cell.config;
    out << row.cell.name << ',' << (row.ok ? 1 : 0) << ',' << '"' << row.error
        << '"' << ',' << to_string(c.pooling) << ',' << c.k << ','
        << c.loss.lambda << ',' << c.loss.gamma << ',' << c.loss.margin << ','
        << c.alpha << ',' << c.localization.tau << ',' << c.embedding_dim << ','
        << c.batch_size << ',' << c.epochs << ',' << c.finetune_epochs << ','
        << c.learning_rate << ',' << c.momentum << ',' << c.weight_decay << ','
        << c.seed << ',' << (row.cell.weighted_finetune ? 1 : 0) << ','
        << (row.cell.use_localizer ? 1 : 0) << ',' << row.test_accuracy << ','
        << row.iou_at_05 << ',' << row.mean_iou << ',' << row.final_train_loss
        << "\n";
  }
}

void write_ablation_json(const std::filesystem::path& path,
                         const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const auto& row : rows) j.push_back(row_to_json(row));
  std::ofstream out(path);
  check_config(out.good(), "cannot write ablation JSON: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace fg
