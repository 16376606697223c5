#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cyctrack/geometry.hpp"
#include "cyctrack/random.hpp"
#include "oracles.hpp"

using namespace cyctrack;

TEST(NormalizeAngle, MapsIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(normalize_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(normalize_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(normalize_angle(3.5), 3.5 - 2 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(normalize_angle(7 * std::numbers::pi + 0.25), -std::numbers::pi + 0.25, 1e-9);
}

TEST(Box3D, RejectsNonPositiveDimensions) {
  EXPECT_THROW(Box3D(0, 0, 0, 0.0, 1, 1, 0), ContractViolation);
  EXPECT_THROW(Box3D(0, 0, 0, 1, -1, 1, 0), ContractViolation);
  EXPECT_THROW(Box3D(0, 0, 0, 1, 1, 0, 0), ContractViolation);
}

TEST(Box3D, CornersAreCounterClockwiseAndSpanFootprint) {
  const Box3D b(1, 2, 0, 4, 2, 1, 0.3);
  const auto c = b.corners();
  EXPECT_NEAR(polygon_area(c), 8.0, 1e-12);
  EXPECT_NEAR(b.footprint_area(), 8.0, 1e-12);
}

TEST(PolygonArea, DegenerateInputs) {
  std::vector<Point2> two{{0, 0}, {1, 1}};
  EXPECT_EQ(polygon_area(two), 0.0);
}

TEST(BevIou, IdenticalBoxesGiveOne) {
  const Box3D b(3, -1, 0, 4, 2, 1.5, 0.7);
  EXPECT_NEAR(bev_iou(b, b), 1.0, 1e-12);
}

TEST(BevIou, FarApartBoxesGiveZero) {
  const Box3D a(0, 0, 0, 5, 5, 1, 0.2);
  const Box3D b(100, 0, 0, 5, 5, 1, 1.1);
  EXPECT_EQ(bev_iou(a, b), 0.0);
}

TEST(BevIou, ShiftedAxisAlignedBoxMatchesRaster) {
  const Box3D a(0, 0, 0, 4, 2, 1, 0);
  const Box3D b(2, 0, 0, 4, 2, 1, 0);
  EXPECT_NEAR(bev_iou(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(bev_iou(a, b), oracle::raster_iou(a, b), 1e-3);
}

TEST(BevIou, IgnoresHeight) {
  const Box3D a(0, 0, 0, 4, 2, 1, 0);
  const Box3D b(1, 0, 50, 4, 2, 9, 0);
  EXPECT_NEAR(bev_iou(a, b), 0.6, 1e-12);
}

TEST(BevIou, SymmetricInRange) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Box3D a(rng.uniform(-2, 2), rng.uniform(-2, 2), 0, rng.uniform(0.5, 5),
                  rng.uniform(0.5, 5), 1, rng.uniform(-3.1, 3.1));
    const Box3D b(rng.uniform(-2, 2), rng.uniform(-2, 2), 0, rng.uniform(0.5, 5),
                  rng.uniform(0.5, 5), 1, rng.uniform(-3.1, 3.1));
    const double ab = bev_iou(a, b);
    EXPECT_NEAR(ab, bev_iou(b, a), 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(BevIou, RotatedPairsMatchRasterOracle) {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const Box3D a(rng.uniform(-1, 1), rng.uniform(-1, 1), 0, rng.uniform(0.5, 5),
                  rng.uniform(0.5, 3), 1, rng.uniform(-3.1, 3.1));
    const Box3D b(rng.uniform(-1, 1), rng.uniform(-1, 1), 0, rng.uniform(0.5, 5),
                  rng.uniform(0.5, 3), 1, rng.uniform(-3.1, 3.1));
    EXPECT_NEAR(bev_iou(a, b), oracle::raster_iou(a, b), 1e-3);
  }
}

TEST(BufferBox, ScalesFootprintOnly) {
  const Box3D b(1, 2, 3, 4.0, 2.0, 1.5, 0.4);
  const Box3D s = buffer_box(b, 0.25);
  EXPECT_DOUBLE_EQ(s.length, 5.0);
  EXPECT_DOUBLE_EQ(s.width, 2.5);
  EXPECT_DOUBLE_EQ(s.height, 1.5);
  EXPECT_DOUBLE_EQ(s.cx, 1.0);
  EXPECT_DOUBLE_EQ(s.yaw, b.yaw);

  const Box3D small(0, 0, 0, 1.0, 0.5, 1, 0);
  const Box3D t = buffer_box(small, 0.5);
  EXPECT_DOUBLE_EQ(t.length, 1.5);
  EXPECT_DOUBLE_EQ(t.width, 0.75);

  EXPECT_EQ(buffer_box(b, 0.0), b);
  EXPECT_THROW(buffer_box(b, -0.1), ContractViolation);
}

TEST(BufferedIou, TouchingBoxesOverlapOnlyWhenBuffered) {
  const Box3D a(0, 0, 0, 2, 2, 1, 0);
  const Box3D b(2, 0, 0, 2, 2, 1, 0);
  EXPECT_EQ(buffered_iou(a, b, 0.0, 0.0), 0.0);
  const double buffered = buffered_iou(a, b, 0.3, 0.3);
  EXPECT_GT(buffered, 0.0);
  EXPECT_NEAR(buffered, oracle::raster_iou(buffer_box(a, 0.3), buffer_box(b, 0.3)), 1e-3);
}

TEST(BufferedIou, IdenticalBoxesWithCommonRatioGiveOne) {
  const Box3D a(5, 5, 0, 3, 1.2, 1, 1.0);
  for (double r : {0.0, 0.1, 0.5, 2.0}) EXPECT_NEAR(buffered_iou(a, a, r, r), 1.0, 1e-12);
}

TEST(BufferedIou, FarBoxesStayDisjoint) {
  const Box3D a(0, 0, 0, 4, 2, 1, 0);
  const Box3D b(100, 100, 0, 4, 2, 1, 0);
  EXPECT_EQ(buffered_iou(a, b, 0.5, 0.5), 0.0);
}

TEST(BufferedIou, MonotoneInCommonRatioForTranslatedCopies) {
  Rng rng(13);
  // Translated copies of one footprint.
  for (int i = 0; i < 100; ++i) {
    const double l = rng.uniform(0.5, 4), w = rng.uniform(0.5, 2), yaw = rng.uniform(-3, 3);
    const Box3D a(0, 0, 0, l, w, 1, yaw);
    const Box3D b(rng.uniform(-4, 4), rng.uniform(-4, 4), 0, l, w, 1, yaw);
    double prev = -1.0;
    for (double r = 0.0; r <= 1.0; r += 0.05) {
      const double v = buffered_iou(a, b, r, r);
      EXPECT_GE(v, prev - 1e-12);
      prev = v;
    }
  }
}

TEST(BufferRatioTable, DefaultsAndValidation) {
  const BufferRatioTable t;
  ASSERT_EQ(t.size(), 5u);
  EXPECT_DOUBLE_EQ(t.at(0), 0.5);
  EXPECT_DOUBLE_EQ(t.at(4), 0.1);
  EXPECT_DOUBLE_EQ(t.at(9), 0.1);
  EXPECT_THROW(BufferRatioTable({0.1, 0.2}), ContractViolation);
  EXPECT_THROW(BufferRatioTable({-0.1}), ContractViolation);
  EXPECT_DOUBLE_EQ(BufferRatioTable::zeros(5).at(3), 0.0);
}

TEST(ScaleLevel, FootprintBreakpoints) {
  const auto& bp = default_area_breakpoints();
  EXPECT_EQ(scale_level_from_area(0.36, bp), 0);
  EXPECT_EQ(scale_level_from_area(1.0, bp), 1);
  EXPECT_EQ(scale_level_from_area(3.99, bp), 1);
  EXPECT_EQ(scale_level_from_area(8.55, bp), 2);
  EXPECT_EQ(scale_level_from_area(20.0, bp), 3);
  EXPECT_EQ(scale_level_from_area(34.8, bp), 4);
}
