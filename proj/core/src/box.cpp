#include "fg/box.hpp"

#include <algorithm>

#include "fg/error.hpp"

namespace fg {

double iou(const BoundingBox& a, const BoundingBox& b) {
  check_contract(a.valid() && b.valid(), "iou requires valid boxes");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double localization_accuracy(const std::vector<BoundingBox>& predicted,
                             const std::vector<BoundingBox>& truth) {
  check_contract(predicted.size() == truth.size(),
                 "prediction/truth lists must be aligned");
  if (predicted.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (iou(predicted[i], truth[i]) >= 0.5) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace fg
