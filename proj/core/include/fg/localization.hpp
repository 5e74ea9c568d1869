#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fg/box.hpp"
#include "fg/pooling.hpp"
#include "fg/tensor.hpp"

namespace fg {

// Spatial activation summary of a feature block, shape 1 x I x J.
struct Heatmap {
  Tensor values;

  explicit Heatmap(Tensor t);
  Heatmap(std::size_t rows, std::size_t cols)
      : values({1, rows, cols}) {}

  std::size_t rows() const { return values.dim(1); }
  std::size_t cols() const { return values.dim(2); }
  double at(std::size_t i, std::size_t j) const {
    return values[i * cols() + j];
  }
  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
};

enum class LocalizationLoss { kSmoothL1, kMse };

struct LocalizationConfig {
  double tau = 0.3;                 // binarization threshold in (0, 1)
  std::size_t input_resize = 32;    // predictor input resolution
  std::size_t predictor_channels = 8;
  LocalizationLoss loss = LocalizationLoss::kSmoothL1;

  void validate() const;
};

// values[i,j] = (1/D) sum_d y[d,i,j].
Heatmap heatmap_from_features(const FeatureBlock& block);

// Affine rescale into [0,1]. A constant heatmap carries no information and
// maps to all zeros, which later triggers the full-image fallback box.
Heatmap minmax_normalize(const Heatmap& h);

// Cell rectangle, inclusive on both ends.
struct CellRect {
  std::size_t i_min = 0, i_max = 0, j_min = 0, j_max = 0;
};

// Tight rectangle over cells strictly greater than tau, or nullopt when no
// cell qualifies.
std::optional<CellRect> threshold_cell_rect(const Heatmap& h, double tau);

// Maps a cell rectangle to pixel coordinates: cell (i,j) covers the
// stride x stride region [j*sx, (j+1)*sx) x [i*sy, (i+1)*sy) with
// sx = image_width / J, sy = image_height / I.
BoundingBox cell_rect_to_box(const CellRect& rect, std::size_t heat_rows,
                             std::size_t heat_cols, std::size_t image_width,
                             std::size_t image_height);

// Smallest pixel rectangle covering all cells with normalized value > tau.
// Falls back to the full image box when nothing clears the threshold.
BoundingBox extract_bbox(const Heatmap& normalized, const LocalizationConfig& cfg,
                         std::size_t image_width, std::size_t image_height);

// Crops the (channels x H x W) image to `box` and resamples to
// target_height x target_width with bilinear interpolation (pixel centers at
// integer + 0.5). A full-image box at the source size is the identity.
Tensor crop_and_resize(const Tensor& image, const BoundingBox& box,
                       std::size_t target_height, std::size_t target_width);

// Mean over cells of 0.5 r^2 for |r| < 1 and |r| - 0.5 otherwise.
double smooth_l1_loss(const Heatmap& predicted, const Heatmap& target,
                      Heatmap* predicted_grad = nullptr);

double mse_loss(const Heatmap& predicted, const Heatmap& target,
                Heatmap* predicted_grad = nullptr);

// Scalar op over {predicted} with a fixed target, for the gradient suite.
class SmoothL1Op final : public DifferentiableOp {
 public:
  explicit SmoothL1Op(Heatmap target) : target_(std::move(target)) {}

  Tensor forward(const std::vector<Tensor>& inputs) override;
  std::vector<Tensor> backward(const Tensor& output_grad) override;

 private:
  Heatmap target_;
  bool forward_ran_ = false;
  Tensor grad_;
};

}  // namespace fg
