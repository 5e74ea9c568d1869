#include "fg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "fg/error.hpp"
#include "fg/rng.hpp"
#include "fg/tensor_io.hpp"

namespace fg {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  check_contract(static_cast<bool>(in), "truncated checkpoint");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_raw(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_raw<std::uint64_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  check_contract(static_cast<bool>(in), "truncated checkpoint string");
  return s;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  check_config(out.good(), "cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& [key, tensor] : tensors) {
    write_string(out, key);
    write_tensor(out, tensor);
  }
  write_raw(out, static_cast<std::uint64_t>(strings.size()));
  for (const auto& [key, value] : strings) {
    write_string(out, key);
    write_string(out, value);
  }
  check_contract(out.good(), "checkpoint write failed");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check_config(in.good(), "cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  check_contract(static_cast<bool>(in) && std::memcmp(magic, kMagic, 4) == 0,
                 "not a checkpoint file");
  check_contract(read_raw<std::uint32_t>(in) == kVersion,
                 "unsupported checkpoint version");
  Checkpoint ckpt;
  const auto tensor_count = read_raw<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    std::string key = read_string(in);
    ckpt.tensors.emplace(std::move(key), read_tensor(in));
  }
  const auto string_count = read_raw<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < string_count; ++i) {
    std::string key = read_string(in);
    ckpt.strings.emplace(std::move(key), read_string(in));
  }
  return ckpt;
}

const Tensor& Checkpoint::tensor(const std::string& key) const {
  const auto it = tensors.find(key);
  check_contract(it != tensors.end(), "checkpoint missing tensor: " + key);
  return it->second;
}

const std::string& Checkpoint::text(const std::string& key) const {
  const auto it = strings.find(key);
  check_contract(it != strings.end(), "checkpoint missing entry: " + key);
  return it->second;
}

void save_model(const std::filesystem::path& path, TinyBackbone& model,
                const ClassMeanStore& store, const ExperimentConfig& cfg) {
  Checkpoint ckpt;
  for (const auto& [name, tensor] : model.named_parameters()) {
    ckpt.tensors[name] = *tensor;
  }
  ckpt.tensors["means.values"] = store.means;
  ckpt.tensors["means.alpha"] = Tensor::scalar(store.alpha);
  ckpt.tensors["means.iteration"] =
      Tensor::scalar(static_cast<double>(store.iteration));
  ckpt.strings["kind"] = "classifier";
  ckpt.strings["pooling"] = to_string(model.pooling());
  ckpt.strings["config"] = cfg.to_json();
  ckpt.save(path);
}

LoadedModel load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = Checkpoint::load(path);
  check_config(ckpt.text("kind") == "classifier",
               "checkpoint does not hold a classifier");
  LoadedModel loaded;
  loaded.config = ExperimentConfig::from_json(ckpt.text("config"));

  Rng scratch(0);
  ExperimentConfig build_cfg = loaded.config;
  build_cfg.pooling = pooling_mode_from_string(ckpt.text("pooling"));
  if (build_cfg.pooling == PoolingMode::kGkmpWeighted) {
    // Construct as GKMP, then switch on the weighted path before restoring w.
    build_cfg.pooling = PoolingMode::kGkmp;
    loaded.model = TinyBackbone(build_cfg, scratch);
    loaded.model.enable_weighted_pooling();
  } else {
    loaded.model = TinyBackbone(build_cfg, scratch);
  }
  for (auto& [name, tensor] : loaded.model.named_parameters()) {
    const Tensor& stored = ckpt.tensor(name);
    check_contract(stored.same_shape(*tensor),
                   "checkpoint parameter shape mismatch: " + name);
    *tensor = stored;
  }
  loaded.store.means = ckpt.tensor("means.values");
  loaded.store.alpha = ckpt.tensor("means.alpha")[0];
  loaded.store.iteration =
      static_cast<std::size_t>(ckpt.tensor("means.iteration")[0]);
  return loaded;
}

void save_localizer(const std::filesystem::path& path, LocalizerNet& net,
                    const ExperimentConfig& cfg) {
  Checkpoint ckpt;
  for (const auto& [name, tensor] : net.named_parameters()) {
    ckpt.tensors[name] = *tensor;
  }
  ckpt.strings["kind"] = "localizer";
  ckpt.strings["config"] = cfg.to_json();
  ckpt.save(path);
}

LocalizerNet load_localizer(const std::filesystem::path& path) {
  const Checkpoint ckpt = Checkpoint::load(path);
  check_config(ckpt.text("kind") == "localizer",
               "checkpoint does not hold a localizer");
  const ExperimentConfig cfg = ExperimentConfig::from_json(ckpt.text("config"));
  Rng scratch(0);
  LocalizerNet net(cfg.dataset.channels, cfg.dataset.image_size,
                   cfg.localization, scratch);
  for (auto& [name, tensor] : net.named_parameters()) {
    const Tensor& stored = ckpt.tensor(name);
    check_contract(stored.same_shape(*tensor),
                   "checkpoint parameter shape mismatch: " + name);
    *tensor = stored;
  }
  return net;
}

}  // namespace fg
