#include "fg/box.hpp"

#include <gtest/gtest.h>

#include "fg/error.hpp"
#include "fg/rng.hpp"

namespace fg {
namespace {

// Counts pixels covered by each box and by both, treating integer-coordinate
// boxes as the set of pixels [x_min, x_max) x [y_min, y_max).
double rasterized_iou(const BoundingBox& a, const BoundingBox& b) {
  long inter = 0, in_a = 0, in_b = 0;
  const long x_lo = static_cast<long>(std::min(a.x_min, b.x_min));
  const long x_hi = static_cast<long>(std::max(a.x_max, b.x_max));
  const long y_lo = static_cast<long>(std::min(a.y_min, b.y_min));
  const long y_hi = static_cast<long>(std::max(a.y_max, b.y_max));
  const auto contains = [](const BoundingBox& box, long x, long y) {
    return x >= box.x_min && x + 1 <= box.x_max && y >= box.y_min &&
           y + 1 <= box.y_max;
  };
  for (long y = y_lo; y < y_hi; ++y) {
    for (long x = x_lo; x < x_hi; ++x) {
      const bool pa = contains(a, x, y);
      const bool pb = contains(b, x, y);
      in_a += pa;
      in_b += pb;
      inter += pa && pb;
    }
  }
  const long uni = in_a + in_b - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox random_int_box(Rng& rng, long extent) {
  const long x0 = static_cast<long>(rng.uniform_index(extent));
  const long x1 = x0 + 1 + static_cast<long>(rng.uniform_index(extent - x0));
  const long y0 = static_cast<long>(rng.uniform_index(extent));
  const long y1 = y0 + 1 + static_cast<long>(rng.uniform_index(extent - y0));
  return {static_cast<double>(x0), static_cast<double>(y0),
          static_cast<double>(x1), static_cast<double>(y1)};
}

TEST(IouTest, IdenticalBoxesGiveOne) {
  const BoundingBox a{1, 2, 5, 6};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
}

TEST(IouTest, DisjointBoxesGiveZero) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {3, 3, 5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {2, 0, 4, 2}), 0.0);  // touching edges
}

TEST(IouTest, HalfOverlappingUnitSquares) {
  // Intersection 0.5, union 1.5.
  EXPECT_NEAR(iou({0, 0, 1, 1}, {0.5, 0, 1.5, 1}), 1.0 / 3.0, 1e-15);
}

TEST(IouTest, SymmetricAndBounded) {
  Rng rng(81);
  for (int trial = 0; trial < 500; ++trial) {
    const BoundingBox a = random_int_box(rng, 20);
    const BoundingBox b = random_int_box(rng, 20);
    const double ab = iou(a, b);
    EXPECT_DOUBLE_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  }
}

TEST(IouTest, MatchesPixelRasterization) {
  Rng rng(82);
  for (int trial = 0; trial < 1000; ++trial) {
    const BoundingBox a = random_int_box(rng, 24);
    const BoundingBox b = random_int_box(rng, 24);
    EXPECT_NEAR(iou(a, b), rasterized_iou(a, b), 1e-9);
  }
}

TEST(IouTest, RejectsInvalidBoxes) {
  EXPECT_THROW(iou({2, 0, 1, 1}, {0, 0, 1, 1}), ContractViolation);
}

TEST(LocalizationAccuracyTest, CountsHitsAtHalfIou) {
  const BoundingBox unit{0, 0, 10, 10};
  const BoundingBox same = unit;
  const BoundingBox far{20, 20, 30, 30};
  const BoundingBox weak{8, 8, 18, 18};  // IoU well below 0.5

  EXPECT_DOUBLE_EQ(localization_accuracy({same}, {unit}), 1.0);
  EXPECT_DOUBLE_EQ(localization_accuracy({far}, {unit}), 0.0);
  EXPECT_DOUBLE_EQ(
      localization_accuracy({same, far, weak, same}, {unit, unit, unit, unit}),
      0.5);
}

TEST(LocalizationAccuracyTest, RejectsMisalignedLists) {
  EXPECT_THROW(localization_accuracy({{0, 0, 1, 1}}, {}), ContractViolation);
}

TEST(BoundingBoxTest, AreaAndValidity) {
  const BoundingBox b{1, 1, 4, 3};
  EXPECT_DOUBLE_EQ(b.area(), 6.0);
  EXPECT_TRUE(b.valid());
  EXPECT_FALSE((BoundingBox{2, 0, 1, 1}).valid());
  const BoundingBox full = BoundingBox::full_image(64, 48);
  EXPECT_DOUBLE_EQ(full.x_max, 64.0);
  EXPECT_DOUBLE_EQ(full.y_max, 48.0);
}

}  // namespace
}  // namespace fg
