#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fg/checkpoint.hpp"
#include "fg/dataset.hpp"
#include "fg/error.hpp"
#include "fg/gradsuite.hpp"
#include "fg/trainer.hpp"

namespace {

namespace fs = std::filesystem;

// Attaches every ExperimentConfig field as a flag so runs are fully
// specifiable from the command line.
void add_config_options(CLI::App* cmd, fg::ExperimentConfig& cfg,
                        std::string& pooling_name) {
  cmd->add_option("--pooling", pooling_name,
                  "Pooling mode: GAP, GMP, GKMP, GKMP+weighted");
  cmd->add_option("--k", cfg.k, "Top-K activations averaged by GKMP");
  cmd->add_option("--lambda", cfg.loss.lambda, "Joint-loss weight on L_w + L_b");
  cmd->add_option("--gamma", cfg.loss.gamma, "Between-class loss weight");
  cmd->add_option("--margin", cfg.loss.margin, "Between-class squared-distance margin");
  cmd->add_option("--alpha", cfg.alpha, "Class-mean learning rate");
  cmd->add_option("--tau", cfg.localization.tau, "Heatmap binarization threshold");
  cmd->add_option("--feature-maps", cfg.feature_maps, "Feature maps D of the last conv");
  cmd->add_option("--embedding-dim", cfg.embedding_dim, "Embedding dimension E");
  cmd->add_option("--batch-size", cfg.batch_size, "Batch size");
  cmd->add_option("--epochs", cfg.epochs, "Stage-1 epochs");
  cmd->add_option("--finetune-epochs", cfg.finetune_epochs,
                  "Weighted-average finetune epochs");
  cmd->add_option("--lr", cfg.learning_rate, "Initial learning rate");
  cmd->add_option("--lr-decay-factor", cfg.lr_decay_factor, "Decay multiplier");
  cmd->add_option("--lr-decay-epoch", cfg.lr_decay_epoch, "Epoch of the decay step");
  cmd->add_option("--momentum", cfg.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", cfg.weight_decay, "Weight decay");
  cmd->add_option("--localizer-epochs", cfg.localizer_epochs, "Stage-3 epochs");
  cmd->add_option("--localizer-lr", cfg.localizer_learning_rate,
                  "Localizer learning rate");
  cmd->add_option("--localizer-input", cfg.localization.input_resize,
                  "Localizer input resolution");
  cmd->add_option("--classes", cfg.dataset.classes, "Synthetic class count");
  cmd->add_option("--train-per-class", cfg.dataset.train_per_class,
                  "Training samples per class");
  cmd->add_option("--test-per-class", cfg.dataset.test_per_class,
                  "Test samples per class");
  cmd->add_option("--image-size", cfg.dataset.image_size, "Image side in pixels");
  cmd->add_option("--channels", cfg.dataset.channels, "Image channels");
  cmd->add_option("--scale-min", cfg.dataset.object_scale_min,
                  "Minimum object scale fraction");
  cmd->add_option("--scale-max", cfg.dataset.object_scale_max,
                  "Maximum object scale fraction");
  cmd->add_option("--distractors", cfg.dataset.distractors,
                  "Background distractor count");
}

void finalize_config(fg::ExperimentConfig& cfg, const std::string& pooling_name) {
  if (!pooling_name.empty()) {
    cfg.pooling = fg::pooling_mode_from_string(pooling_name);
  }
  cfg.validate();
}

struct LoadedData {
  std::vector<fg::SyntheticSample> train;
  std::vector<fg::SyntheticSample> test;
};

LoadedData obtain_data(const std::string& data_dir, const fg::ExperimentConfig& cfg) {
  LoadedData data;
  if (!data_dir.empty()) {
    data.train = fg::load_dataset(fs::path(data_dir) / "train");
    data.test = fg::load_dataset(fs::path(data_dir) / "test");
  } else {
    data.train = fg::generate_dataset(cfg.dataset, cfg.seed);
    data.test = fg::generate_dataset(cfg.dataset, cfg.seed, true);
  }
  return data;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out.good()) throw fg::ConfigError("cannot write " + path.string());
  out << text << "\n";
}

int cmd_gradcheck(std::size_t seeds) {
  const fg::SuiteReport report = fg::run_gradient_suite(seeds);
  for (const auto& check : report.checks) {
    std::printf("[gradcheck] %-36s %s  (seeds %zu, worst |diff| %.3e)%s%s\n",
                check.name.c_str(), check.passed ? "PASS" : "FAIL",
                check.seeds_run, check.worst_error,
                check.detail.empty() ? "" : "  ", check.detail.c_str());
  }
  std::printf("[gradcheck] %s\n", report.all_passed() ? "all checks passed"
                                                      : "FAILURES detected");
  return report.all_passed() ? 0 : 1;
}

int cmd_gen_data(const fg::ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& split) {
  const fs::path root(out_dir);
  if (split == "train" || split == "both") {
    const auto samples = fg::generate_dataset(cfg.dataset, cfg.seed);
    fg::save_dataset(root / "train", samples, cfg.dataset);
    std::printf("wrote %zu training samples to %s\n", samples.size(),
                (root / "train").c_str());
  }
  if (split == "test" || split == "both") {
    const auto samples = fg::generate_dataset(cfg.dataset, cfg.seed, true);
    fg::save_dataset(root / "test", samples, cfg.dataset);
    std::printf("wrote %zu test samples to %s\n", samples.size(),
                (root / "test").c_str());
  }
  return 0;
}

int cmd_train(const fg::ExperimentConfig& cfg, const std::string& out_dir,
              const std::string& data_dir, bool finetune) {
  const fs::path root(out_dir);
  fs::create_directories(root);
  const LoadedData data = obtain_data(data_dir, cfg);

  fg::TrainOptions opts;
  opts.metrics_path = root / "metrics.jsonl";
  opts.log = &std::cout;
  fg::TrainResult result = fg::train_classifier(cfg, data.train, opts);
  if (finetune) {
    fg::finetune_weighted_average(result, cfg, data.train, opts);
  }

  fg::save_model(root / "model.ckpt", result.model, result.store, cfg);
  write_text(root / "config.json", cfg.to_json(2));

  const double test_accuracy = fg::plain_accuracy(result.model, data.test);
  std::ofstream csv(root / "summary.csv");
  csv << "epochs,final_train_loss,final_train_accuracy,test_accuracy\n";
  const auto& last = result.trace.back();
  csv << result.trace.size() << ',' << last.total_loss << ','
      << last.train_accuracy << ',' << test_accuracy << "\n";
  std::printf("test accuracy %.4f; checkpoint at %s\n", test_accuracy,
              (root / "model.ckpt").c_str());
  return 0;
}

int cmd_train_loc(const std::string& model_path, const std::string& out_dir,
                  const std::string& data_dir, std::size_t epochs_override,
                  std::uint64_t seed, bool seed_given) {
  const fs::path root(out_dir);
  fs::create_directories(root);
  fg::LoadedModel loaded = fg::load_model(model_path);
  fg::ExperimentConfig cfg = loaded.config;
  if (seed_given) cfg.seed = seed;

  const LoadedData data = obtain_data(data_dir, cfg);
  std::vector<fg::Tensor> images;
  images.reserve(data.train.size());
  for (const auto& s : data.train) images.push_back(s.image);

  fg::LocalizerTrainOptions opts;
  opts.epochs = epochs_override ? epochs_override : cfg.localizer_epochs;
  opts.batch_size = cfg.batch_size;
  opts.sgd = fg::SgdConfig{cfg.localizer_learning_rate, cfg.momentum, 0.0};
  opts.loss = cfg.localization.loss;
  opts.seed = cfg.seed + 1;
  fg::LocalizerTrainResult result =
      fg::train_localizer(images, loaded.model, cfg.localization, opts);

  std::ofstream jsonl(root / "loc_metrics.jsonl");
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    jsonl << "{\"epoch\":" << e << ",\"loss\":" << result.epoch_loss[e] << "}\n";
  }
  fg::save_localizer(root / "localizer.ckpt", result.net, cfg);
  std::printf("final distillation loss %.6f; checkpoint at %s\n",
              result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(),
              (root / "localizer.ckpt").c_str());
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& localizer_path,
             const std::string& data_dir, const std::string& boxes,
             const std::string& out_file) {
  fg::LoadedModel loaded = fg::load_model(model_path);
  const LoadedData data = obtain_data(data_dir, loaded.config);

  fg::LocalizerNet localizer;
  fg::BoxSource source = fg::BoxSource::kFullImage;
  if (boxes == "localizer") {
    if (localizer_path.empty()) {
      throw fg::ConfigError("--boxes localizer requires --localizer");
    }
    localizer = fg::load_localizer(localizer_path);
    source = fg::BoxSource::kLocalizer;
  } else if (boxes == "truth") {
    source = fg::BoxSource::kTruth;
  } else if (boxes != "full") {
    throw fg::ConfigError("--boxes must be full, localizer or truth");
  }

  const fg::PipelineMetrics metrics = fg::evaluate_pipeline(
      loaded.model, source == fg::BoxSource::kLocalizer ? &localizer : nullptr,
      data.test, loaded.config.localization, source);
  std::printf("%s\n", metrics.to_json().c_str());
  if (!out_file.empty()) write_text(out_file, metrics.to_json());
  return 0;
}

int cmd_ablate(const fg::ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& preset, const std::vector<std::size_t>& ks) {
  const fs::path root(out_dir);
  fs::create_directories(root);
  std::vector<fg::AblationCell> grid;
  if (preset == "table") {
    grid = fg::ablation_table_preset(cfg);
  } else if (preset == "ksweep") {
    std::vector<std::size_t> k_values = ks;
    if (k_values.empty()) {
      const std::size_t cells =
          (cfg.dataset.image_size / 8) * (cfg.dataset.image_size / 8);
      k_values = {1, 2, 4, 8, 16, 32, cells};
    }
    grid = fg::k_sweep_preset(cfg, k_values);
  } else {
    throw fg::ConfigError("--preset must be table or ksweep");
  }
  const auto rows = fg::run_ablation(grid, &std::cout);
  fg::write_ablation_csv(root / "results.csv", rows);
  fg::write_ablation_json(root / "results.json", rows);
  std::printf("wrote %zu rows to %s\n", rows.size(), (root / "results.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-grained classification testbed: k-max pooling, class-mean "
               "embedding loss and heatmap-based localization on synthetic data"};
  app.require_subcommand(1);

  // gradcheck
  std::size_t seeds = 10;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Run all finite-difference gradient suites");
  gradcheck->add_option("--seeds", seeds, "Random seeds per check");

  // shared config state per subcommand
  fg::ExperimentConfig train_cfg, gen_cfg, ablate_cfg;
  std::string train_pool, gen_pool, ablate_pool;

  // gen-data
  std::string gen_out = "dataset";
  std::string gen_split = "both";
  auto* gen = app.add_subcommand("gen-data", "Materialize a synthetic dataset");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_cfg.seed, "Dataset seed")->required();
  gen->add_option("--split", gen_split, "train, test or both");
  add_config_options(gen, gen_cfg, gen_pool);

  // train
  std::string train_out = "run";
  std::string train_data;
  bool do_finetune = false;
  auto* train = app.add_subcommand("train", "Train the classifier (stages 1-2)");
  train->add_option("--seed", train_cfg.seed, "Run seed")->required();
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--data", train_data, "Dataset directory from gen-data");
  train->add_flag("--finetune", do_finetune,
                  "Run the weighted-average finetune stage after training");
  add_config_options(train, train_cfg, train_pool);

  // train-loc
  std::string loc_model, loc_out = "run", loc_data;
  std::size_t loc_epochs = 0;
  std::uint64_t loc_seed = 0;
  auto* train_loc = app.add_subcommand(
      "train-loc", "Distill the localizer from a trained classifier (stage 3)");
  train_loc->add_option("--model", loc_model, "Classifier checkpoint")->required();
  train_loc->add_option("--out", loc_out, "Output directory");
  train_loc->add_option("--data", loc_data, "Dataset directory");
  train_loc->add_option("--epochs", loc_epochs, "Override localizer epochs");
  auto* loc_seed_opt = train_loc->add_option("--seed", loc_seed, "Override seed");

  // eval
  std::string eval_model, eval_localizer, eval_data, eval_out;
  std::string eval_boxes = "full";
  auto* eval = app.add_subcommand("eval", "Evaluate the pipeline (stage 4)");
  eval->add_option("--model", eval_model, "Classifier checkpoint")->required();
  eval->add_option("--localizer", eval_localizer, "Localizer checkpoint");
  eval->add_option("--data", eval_data, "Dataset directory");
  eval->add_option("--boxes", eval_boxes, "Box source: full, localizer, truth");
  eval->add_option("--out", eval_out, "Write metrics JSON here");

  // ablate
  std::string ablate_out = "ablation";
  std::string ablate_preset = "table";
  std::vector<std::size_t> ablate_ks;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  ablate->add_option("--seed", ablate_cfg.seed, "Run seed")->required();
  ablate->add_option("--out", ablate_out, "Output directory");
  ablate->add_option("--preset", ablate_preset, "table or ksweep");
  ablate->add_option("--k-list", ablate_ks, "K values for the ksweep preset");
  add_config_options(ablate, ablate_cfg, ablate_pool);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck->parsed()) return cmd_gradcheck(seeds);
    if (gen->parsed()) {
      finalize_config(gen_cfg, gen_pool);
      return cmd_gen_data(gen_cfg, gen_out, gen_split);
    }
    if (train->parsed()) {
      finalize_config(train_cfg, train_pool);
      return cmd_train(train_cfg, train_out, train_data, do_finetune);
    }
    if (train_loc->parsed()) {
      return cmd_train_loc(loc_model, loc_out, loc_data, loc_epochs, loc_seed,
                           loc_seed_opt->count() > 0);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_model, eval_localizer, eval_data, eval_boxes, eval_out);
    }
    if (ablate->parsed()) {
      finalize_config(ablate_cfg, ablate_pool);
      return cmd_ablate(ablate_cfg, ablate_out, ablate_preset, ablate_ks);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
