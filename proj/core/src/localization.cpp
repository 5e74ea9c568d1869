#include "fg/localization.hpp"

#include <algorithm>
#include <cmath>

#include "fg/error.hpp"

namespace fg {

Heatmap::Heatmap(Tensor t) : values(std::move(t)) {
  check_contract(values.rank() == 3 && values.dim(0) == 1,
                 "heatmap must be 1 x I x J");
}

void LocalizationConfig::validate() const {
  check_config(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
  check_config(input_resize >= 4, "predictor input resolution too small");
  check_config(predictor_channels >= 1, "predictor needs at least one channel");
}

Heatmap heatmap_from_features(const FeatureBlock& block) {
  Heatmap h(block.rows(), block.cols());
  const double inv_d = 1.0 / static_cast<double>(block.maps());
  for (std::size_t d = 0; d < block.maps(); ++d) {
    const auto map = block.map(d);
    for (std::size_t c = 0; c < block.cells(); ++c) {
      h.values[c] += map[c];
    }
  }
  for (std::size_t c = 0; c < block.cells(); ++c) h.values[c] *= inv_d;
  return h;
}

Heatmap minmax_normalize(const Heatmap& h) {
  double lo = h.values[0], hi = h.values[0];
  for (double v : h.values.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Heatmap out(h.rows(), h.cols());
  if (hi == lo) return out;  // constant map -> all zeros
  const double inv = 1.0 / (hi - lo);
  for (std::size_t c = 0; c < h.values.size(); ++c) {
    out.values[c] = (h.values[c] - lo) * inv;
  }
  return out;
}

std::optional<CellRect> threshold_cell_rect(const Heatmap& h, double tau) {
  bool any = false;
  CellRect rect;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) {
      if (!(h.at(i, j) > tau)) continue;  // strictly greater than tau
      if (!any) {
        rect = {i, i, j, j};
        any = true;
      } else {
        rect.i_min = std::min(rect.i_min, i);
        rect.i_max = std::max(rect.i_max, i);
        rect.j_min = std::min(rect.j_min, j);
        rect.j_max = std::max(rect.j_max, j);
      }
    }
  }
  if (!any) return std::nullopt;
  return rect;
}

BoundingBox cell_rect_to_box(const CellRect& rect, std::size_t heat_rows,
                             std::size_t heat_cols, std::size_t image_width,
                             std::size_t image_height) {
  const double sx = static_cast<double>(image_width) / static_cast<double>(heat_cols);
  const double sy = static_cast<double>(image_height) / static_cast<double>(heat_rows);
  BoundingBox box;
  box.x_min = static_cast<double>(rect.j_min) * sx;
  box.x_max = static_cast<double>(rect.j_max + 1) * sx;
  box.y_min = static_cast<double>(rect.i_min) * sy;
  box.y_max = static_cast<double>(rect.i_max + 1) * sy;
  box.x_max = std::min(box.x_max, static_cast<double>(image_width));
  box.y_max = std::min(box.y_max, static_cast<double>(image_height));
  return box;
}

BoundingBox extract_bbox(const Heatmap& normalized, const LocalizationConfig& cfg,
                         std::size_t image_width, std::size_t image_height) {
  cfg.validate();
  const auto rect = threshold_cell_rect(normalized, cfg.tau);
  if (!rect) return BoundingBox::full_image(image_width, image_height);
  return cell_rect_to_box(*rect, normalized.rows(), normalized.cols(),
                          image_width, image_height);
}

Tensor crop_and_resize(const Tensor& image, const BoundingBox& box,
                       std::size_t target_height, std::size_t target_width) {
  check_contract(image.rank() == 3, "image must be channels x H x W");
  check_contract(box.valid(), "invalid box");
  check_config(box.area() > 0.0, "cannot crop a zero-area box");
  const std::size_t channels = image.dim(0);
  const std::size_t src_h = image.dim(1);
  const std::size_t src_w = image.dim(2);
  check_contract(box.x_min >= 0.0 && box.y_min >= 0.0 &&
                     box.x_max <= static_cast<double>(src_w) &&
                     box.y_max <= static_cast<double>(src_h),
                 "box must lie inside the image");

  Tensor out({channels, target_height, target_width});
  const double scale_x = box.width() / static_cast<double>(target_width);
  const double scale_y = box.height() / static_cast<double>(target_height);
  const auto sample = [&](std::size_t ch, long yi, long xi) {
    const long yc = std::clamp<long>(yi, 0, static_cast<long>(src_h) - 1);
    const long xc = std::clamp<long>(xi, 0, static_cast<long>(src_w) - 1);
    return image[(ch * src_h + static_cast<std::size_t>(yc)) * src_w +
                 static_cast<std::size_t>(xc)];
  };
  for (std::size_t ch = 0; ch < channels; ++ch) {
    for (std::size_t ty = 0; ty < target_height; ++ty) {
      const double sy = box.y_min + (static_cast<double>(ty) + 0.5) * scale_y - 0.5;
      const long y0 = static_cast<long>(std::floor(sy));
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t tx = 0; tx < target_width; ++tx) {
        const double sx = box.x_min + (static_cast<double>(tx) + 0.5) * scale_x - 0.5;
        const long x0 = static_cast<long>(std::floor(sx));
        const double fx = sx - static_cast<double>(x0);
        const double v00 = sample(ch, y0, x0);
        const double v01 = sample(ch, y0, x0 + 1);
        const double v10 = sample(ch, y0 + 1, x0);
        const double v11 = sample(ch, y0 + 1, x0 + 1);
        out[(ch * target_height + ty) * target_width + tx] =
            v00 * (1.0 - fy) * (1.0 - fx) + v01 * (1.0 - fy) * fx +
            v10 * fy * (1.0 - fx) + v11 * fy * fx;
      }
    }
  }
  return out;
}

namespace {

double pointwise_loss(const Heatmap& predicted, const Heatmap& target,
                      Heatmap* grad, bool smooth) {
  check_contract(predicted.values.same_shape(target.values),
                 "loss requires identical heatmap shapes");
  const std::size_t n = predicted.values.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) *grad = Heatmap(predicted.rows(), predicted.cols());
  double acc = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double r = predicted.values[c] - target.values[c];
    if (smooth) {
      const double a = std::abs(r);
      acc += a < 1.0 ? 0.5 * r * r : a - 0.5;
      if (grad) grad->values[c] = inv_n * (a < 1.0 ? r : (r > 0.0 ? 1.0 : -1.0));
    } else {
      acc += r * r;
      if (grad) grad->values[c] = inv_n * 2.0 * r;
    }
  }
  return acc * inv_n;
}

}  // namespace

double smooth_l1_loss(const Heatmap& predicted, const Heatmap& target,
                      Heatmap* predicted_grad) {
  return pointwise_loss(predicted, target, predicted_grad, true);
}

double mse_loss(const Heatmap& predicted, const Heatmap& target,
                Heatmap* predicted_grad) {
  return pointwise_loss(predicted, target, predicted_grad, false);
}

Tensor SmoothL1Op::forward(const std::vector<Tensor>& inputs) {
  check_contract(inputs.size() == 1, "SmoothL1Op expects {predicted}");
  Heatmap predicted(inputs[0]);
  Heatmap grad(predicted.rows(), predicted.cols());
  const double loss = smooth_l1_loss(predicted, target_, &grad);
  grad_ = std::move(grad.values);
  forward_ran_ = true;
  return Tensor::scalar(loss);
}

std::vector<Tensor> SmoothL1Op::backward(const Tensor& output_grad) {
  check_contract(forward_ran_, "backward called before forward");
  check_contract(output_grad.size() == 1, "output_grad must be scalar");
  Tensor g = grad_;
  g *= output_grad[0];
  return {std::move(g)};
}

}  // namespace fg
