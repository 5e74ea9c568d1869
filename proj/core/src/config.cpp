#include "fg/config.hpp"

#include <nlohmann/json.hpp>

#include "fg/error.hpp"

namespace fg {

using nlohmann::json;

std::string to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::kGap: return "GAP";
    case PoolingMode::kGmp: return "GMP";
    case PoolingMode::kGkmp: return "GKMP";
    case PoolingMode::kGkmpWeighted: return "GKMP+weighted";
  }
  return "GKMP";
}

PoolingMode pooling_mode_from_string(const std::string& name) {
  if (name == "GAP") return PoolingMode::kGap;
  if (name == "GMP") return PoolingMode::kGmp;
  if (name == "GKMP") return PoolingMode::kGkmp;
  if (name == "GKMP+weighted" || name == "GKMP-weighted") {
    return PoolingMode::kGkmpWeighted;
  }
  throw ConfigError("unknown pooling mode: " + name);
}

void DatasetSpec::validate() const {
  check_config(classes >= 2, "need at least two classes");
  check_config(train_per_class >= 1 && test_per_class >= 1,
               "need at least one sample per class");
  check_config(image_size >= 16, "image size too small");
  check_config(channels >= 1, "need at least one channel");
  check_config(object_scale_min > 0.0 && object_scale_min <= object_scale_max,
               "object scale range must be positive and ordered");
  check_config(object_scale_max < 1.0,
               "object would not fit inside the image");
}

void ExperimentConfig::validate() const {
  loss.validate();
  localization.validate();
  dataset.validate();
  check_config(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  check_config(k >= 1, "K must be at least 1");
  check_config(batch_size >= 1, "batch size must be positive");
  check_config(learning_rate > 0.0, "learning rate must be positive");
  check_config(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0,
               "decay factor must lie in (0, 1]");
  check_config(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  check_config(weight_decay >= 0.0, "weight decay must be non-negative");
  check_config(feature_maps >= 1 && embedding_dim >= 1,
               "model dimensions must be positive");
}

namespace {

json dataset_to_json(const DatasetSpec& d) {
  return json{{"classes", d.classes},
              {"train_per_class", d.train_per_class},
              {"test_per_class", d.test_per_class},
              {"image_size", d.image_size},
              {"channels", d.channels},
              {"object_scale_min", d.object_scale_min},
              {"object_scale_max", d.object_scale_max},
              {"distractors", d.distractors}};
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  d.classes = j.at("classes").get<std::size_t>();
  d.train_per_class = j.at("train_per_class").get<std::size_t>();
  d.test_per_class = j.at("test_per_class").get<std::size_t>();
  d.image_size = j.at("image_size").get<std::size_t>();
  d.channels = j.at("channels").get<std::size_t>();
  d.object_scale_min = j.at("object_scale_min").get<double>();
  d.object_scale_max = j.at("object_scale_max").get<double>();
  d.distractors = j.at("distractors").get<std::size_t>();
  return d;
}

}  // namespace

std::string ExperimentConfig::to_json(int indent) const {
  json j{{"pooling", to_string(pooling)},
         {"k", k},
         {"lambda", loss.lambda},
         {"gamma", loss.gamma},
         {"margin", loss.margin},
         {"alpha", alpha},
         {"feature_maps", feature_maps},
         {"embedding_dim", embedding_dim},
         {"batch_size", batch_size},
         {"epochs", epochs},
         {"finetune_epochs", finetune_epochs},
         {"learning_rate", learning_rate},
         {"lr_decay_factor", lr_decay_factor},
         {"lr_decay_epoch", lr_decay_epoch},
         {"momentum", momentum},
         {"weight_decay", weight_decay},
         {"tau", localization.tau},
         {"localizer_input", localization.input_resize},
         {"localizer_channels", localization.predictor_channels},
         {"localizer_loss",
          localization.loss == LocalizationLoss::kSmoothL1 ? "smooth_l1" : "mse"},
         {"localizer_epochs", localizer_epochs},
         {"localizer_learning_rate", localizer_learning_rate},
         {"seed", seed},
         {"dataset", dataset_to_json(dataset)}};
  return indent >= 0 ? j.dump(indent) : j.dump();
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.pooling = pooling_mode_from_string(j.at("pooling").get<std::string>());
  cfg.k = j.at("k").get<std::size_t>();
  cfg.loss.lambda = j.at("lambda").get<double>();
  cfg.loss.gamma = j.at("gamma").get<double>();
  cfg.loss.margin = j.at("margin").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.feature_maps = j.at("feature_maps").get<std::size_t>();
  cfg.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.finetune_epochs = j.at("finetune_epochs").get<std::size_t>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.lr_decay_factor = j.at("lr_decay_factor").get<double>();
  cfg.lr_decay_epoch = j.at("lr_decay_epoch").get<std::size_t>();
  cfg.momentum = j.at("momentum").get<double>();
  cfg.weight_decay = j.at("weight_decay").get<double>();
  cfg.localization.tau = j.at("tau").get<double>();
  cfg.localization.input_resize = j.at("localizer_input").get<std::size_t>();
  cfg.localization.predictor_channels =
      j.at("localizer_channels").get<std::size_t>();
  cfg.localization.loss = j.at("localizer_loss").get<std::string>() == "mse"
                              ? LocalizationLoss::kMse
                              : LocalizationLoss::kSmoothL1;
  cfg.localizer_epochs = j.at("localizer_epochs").get<std::size_t>();
  cfg.localizer_learning_rate = j.at("localizer_learning_rate").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.dataset = dataset_from_json(j.at("dataset"));
  return cfg;
}

}  // namespace fg
