#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fg/backbone.hpp"
#include "fg/embedding.hpp"
#include "fg/localizer.hpp"
#include "fg/tensor.hpp"

namespace fg {

// Versioned single-file binary container of named tensors and strings.
// Tensor payloads are raw little-endian doubles, so save/load round-trips are
// bit-exact.
struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> strings;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const Tensor& tensor(const std::string& key) const;
  const std::string& text(const std::string& key) const;
};

// Classifier checkpoint: parameters, class-mean store and config echo.
void save_model(const std::filesystem::path& path, TinyBackbone& model,
                const ClassMeanStore& store, const ExperimentConfig& cfg);

struct LoadedModel {
  TinyBackbone model;
  ClassMeanStore store;
  ExperimentConfig config;
};
LoadedModel load_model(const std::filesystem::path& path);

void save_localizer(const std::filesystem::path& path, LocalizerNet& net,
                    const ExperimentConfig& cfg);
LocalizerNet load_localizer(const std::filesystem::path& path);

}  // namespace fg
