#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fg/box.hpp"
#include "fg/config.hpp"
#include "fg/tensor.hpp"

namespace fg {

// One rendered image with its class and the tight box around the object.
// The binary object mask is kept for verification; it is derived data and is
// not part of the on-disk format.
struct SyntheticSample {
  Tensor image;  // channels x H x W
  int label = 0;
  BoundingBox truth_box;
  Tensor mask;  // H x W, 1 inside the object
};

// Renders a deterministic fine-grained benchmark. Every class draws the same
// kind of striped blob; classes differ only in stripe frequency, lobe count
// and lobe depth, so inter-class variation stays small. Position, scale,
// orientation and background clutter vary freely within a class and never
// determine the label.
std::vector<SyntheticSample> generate_dataset(const DatasetSpec& spec,
                                              std::uint64_t seed,
                                              bool test_split = false);

// On-disk layout: one binary tensor file per sample plus index.json carrying
// label and truth box per file.
void save_dataset(const std::filesystem::path& dir,
                  const std::vector<SyntheticSample>& samples,
                  const DatasetSpec& spec);
std::vector<SyntheticSample> load_dataset(const std::filesystem::path& dir);

}  // namespace fg
