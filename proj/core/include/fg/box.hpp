#pragma once

#include <cstddef>
#include <vector>

namespace fg {

// Axis-aligned rectangle in input-pixel coordinates, half-open:
// the box covers [x_min, x_max) x [y_min, y_max). Integer-coordinate boxes
// therefore cover exactly the pixels x_min..x_max-1, y_min..y_max-1 and
// area() equals the pixel count.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  static BoundingBox full_image(std::size_t width, std::size_t height) {
    return {0.0, 0.0, static_cast<double>(width), static_cast<double>(height)};
  }
};

// area(a ∩ b) / area(a ∪ b); disjoint or degenerate pairs give 0.
double iou(const BoundingBox& a, const BoundingBox& b);

// Fraction of aligned prediction/truth pairs with iou >= 0.5.
double localization_accuracy(const std::vector<BoundingBox>& predicted,
                             const std::vector<BoundingBox>& truth);

}  // namespace fg
