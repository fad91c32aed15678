#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hcma/error.hpp"
#include "hcma/geometry.hpp"
#include "verify.hpp"

namespace {

using namespace hcma::geometry;

// Pinhole camera at the origin looking down +z: M = K [I | 0].
CameraView axis_camera(double f = 100.0, int w = 200, int h = 200) {
  CameraView cam;
  cam.M = {f, 0, w / 2.0, 0, 0, f, h / 2.0, 0, 0, 0, 1, 0};
  cam.image = Raster(h, w, 4);
  return cam;
}

TEST(Box, MakeRejectsNonPositiveSize) {
  EXPECT_THROW(Box3D::make({0, 0, 0}, {1, 0, 1}), hcma::DegenerateInputError);
  EXPECT_THROW(Box3D::make({0, 0, 0}, {1, -1, 1}), hcma::DegenerateInputError);
  EXPECT_THROW(Box2D::make({2, 0}, {1, 1}), hcma::DegenerateInputError);
}

TEST(Box, HeadingWrapped) {
  const Box3D b = Box3D::make({0, 0, 0}, {1, 1, 1}, 3 * std::numbers::pi);
  EXPECT_GE(b.heading, -std::numbers::pi);
  EXPECT_LT(b.heading, std::numbers::pi);
  EXPECT_NEAR(std::abs(b.heading), std::numbers::pi, 1e-12);
}

TEST(Projection, CubeOnAxisIsSymmetric) {
  const CameraView cam = axis_camera();
  const Box2D r = project_box3d_to_2d(Box3D::make({0, 0, 4}, {1, 1, 1}), cam);
  // Nearest face at depth 3.5; half extent 0.5 -> 100 * 0.5 / 3.5 pixels.
  const double half = 100.0 * 0.5 / 3.5;
  EXPECT_NEAR(r.min[0], 100.0 - half, 1e-9);
  EXPECT_NEAR(r.max[0], 100.0 + half, 1e-9);
  EXPECT_NEAR(r.min[1], 100.0 - half, 1e-9);
  EXPECT_NEAR(r.max[1], 100.0 + half, 1e-9);
}

TEST(Projection, BehindCameraThrows) {
  const CameraView cam = axis_camera();
  EXPECT_THROW(project_box3d_to_2d(Box3D::make({0, 0, -2}, {1, 1, 1}), cam),
               hcma::BehindCameraError);
  // Centre in front but a corner behind the plane.
  EXPECT_THROW(project_box3d_to_2d(Box3D::make({0, 0, 0.3}, {1, 1, 1}), cam),
               hcma::BehindCameraError);
}

TEST(Projection, ClampedToImage) {
  const CameraView cam = axis_camera();
  const Box2D r = project_box3d_to_2d(Box3D::make({3, 0, 4}, {2, 8, 1}), cam);
  EXPECT_EQ(r.max[0], 200.0);
  EXPECT_EQ(r.min[1], 0.0);
  EXPECT_EQ(r.max[1], 200.0);
  EXPECT_GT(r.min[0], 100.0);
}

TEST(Projection, LookAtCentresTarget) {
  CameraView cam;
  cam.M = look_at_projection({4, -3, 2}, {0, 0, 0.5}, 1.0, 64, 48);
  cam.image = Raster(48, 64, 4);
  const Vec3 uvw = cam.project({0, 0, 0.5});
  EXPECT_NEAR(uvw[0], 32.0, 1e-9);
  EXPECT_NEAR(uvw[1], 24.0, 1e-9);
  EXPECT_GT(uvw[2], 0.0);
}

PointSet blob(const Vec3& c, std::size_t n, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  PointSet p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({c[0] + u(rng), c[1] + u(rng), c[2] + u(rng)});
  return p;
}

TEST(Backproject, SingleClusterReturnedWhole) {
  const CameraView cam = axis_camera();
  const PointSet pts = blob({0, 0, 5}, 40, 0.2, 1);
  const PointSet got = backproject_box2d(Box2D::make({0, 0}, {200, 200}), cam, pts, {});
  EXPECT_EQ(got, pts);
}

TEST(Backproject, StraysDroppedAgainstComponentsOracle) {
  const CameraView cam = axis_camera();
  PointSet pts = blob({0, 0, 5}, 50, 0.2, 2);
  pts.push_back({1.5, 1.5, 6.0});
  pts.push_back({-1.5, 1.0, 4.0});
  pts.push_back({1.0, -1.5, 7.0});
  const ClusterConfig cfg;
  const Box2D full = Box2D::make({0, 0}, {200, 200});
  const PointSet got = backproject_box2d(full, cam, pts, cfg);
  EXPECT_EQ(got.size(), 50u);
  EXPECT_EQ(got, PointSet(pts.begin(), pts.begin() + 50));
  EXPECT_EQ(got, hcma::verify::backproject_oracle(full, cam, pts, cfg));
}

TEST(Backproject, EmptyFrustum) {
  const CameraView cam = axis_camera();
  const PointSet pts = blob({0, 0, 5}, 30, 0.2, 3);
  EXPECT_TRUE(backproject_box2d(Box2D::make({0, 0}, {10, 10}), cam, pts, {}).empty());
}

TEST(Dbscan, NoiseAndOrderOfDiscovery) {
  PointSet pts = blob({5, 5, 5}, 10, 0.05, 4);
  const PointSet first = blob({0, 0, 0}, 10, 0.05, 5);
  pts.insert(pts.begin(), {20, 20, 20});
  pts.insert(pts.end(), first.begin(), first.end());
  const auto labels = dbscan(pts, 0.3, 5);
  EXPECT_EQ(labels[0], -1);
  EXPECT_EQ(labels[1], 0);
  EXPECT_EQ(labels.back(), 1);
}

TEST(FitBox, CuboidCorners) {
  PointSet pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back({1.0 + ((i & 1) ? 0.5 : -0.5), 2.0 + ((i & 2) ? 1.0 : -1.0),
                   3.0 + ((i & 4) ? 1.5 : -1.5)});
  }
  const Box3D b = fit_box3d(pts);
  EXPECT_NEAR(b.center[0], 1.0, 1e-12);
  EXPECT_NEAR(b.center[1], 2.0, 1e-12);
  EXPECT_NEAR(b.center[2], 3.0, 1e-12);
  EXPECT_NEAR(b.size[0], 1.0, 1e-12);
  EXPECT_NEAR(b.size[1], 2.0, 1e-12);
  EXPECT_NEAR(b.size[2], 3.0, 1e-12);
  EXPECT_EQ(b.heading, 0.0);
}

TEST(FitBox, TooFewPoints) {
  const PointSet two{{0, 0, 0}, {1, 1, 1}};
  EXPECT_THROW(fit_box3d(two), hcma::DegenerateInputError);
}

TEST(FitBox, FlatAxisFloored) {
  PointSet pts;
  for (int i = 0; i < 10; ++i) pts.push_back({0.1 * i, 0.05 * (i % 3), 0.7});
  ClusterConfig cfg;
  cfg.min_size = 0.05;
  const Box3D b = fit_box3d(pts, cfg);
  EXPECT_DOUBLE_EQ(b.size[2], 0.05);
  EXPECT_NEAR(b.center[2], 0.7, 1e-12);
}

TEST(Iou, Examples) {
  const Box3D a = Box3D::make({0, 0, 0}, {1, 1, 1});
  EXPECT_DOUBLE_EQ(iou3d(a, a), 1.0);
  EXPECT_EQ(iou3d(a, Box3D::make({5, 0, 0}, {1, 1, 1})), 0.0);
  EXPECT_NEAR(iou3d(a, Box3D::make({0.5, 0, 0}, {1, 1, 1})), 1.0 / 3.0, 1e-12);
}

TEST(Iou, RotatedSquareInsideCircumscribed) {
  // A unit square rotated 45 degrees inside a sqrt(2) square: intersection is
  // the whole rotated square.
  const Box3D inner = Box3D::make({0, 0, 0}, {1, 1, 1}, std::numbers::pi / 4);
  const Box3D outer = Box3D::make({0, 0, 0}, {std::sqrt(2.0), std::sqrt(2.0), 1});
  EXPECT_NEAR(iou3d(inner, outer), 0.5, 1e-12);
}

TEST(Iou, ConvexIntersectionArea) {
  const std::vector<Vec2> a{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const std::vector<Vec2> b{{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  EXPECT_NEAR(convex_intersection_area(a, b), 1.0, 1e-12);
}

TEST(Ap, PerfectPredictions) {
  std::vector<GroundTruth> gts{{Box3D::make({0, 0, 0}, {1, 1, 1}), 0},
                               {Box3D::make({3, 0, 0}, {1, 1, 1}), 0}};
  std::vector<DetectionResult> preds;
  for (const auto& g : gts) preds.push_back({g.box, g.class_index, 1.0});
  EXPECT_EQ(ap_at_iou(preds, gts, 0, 0.25), 1.0);
  EXPECT_EQ(ap_at_iou(preds, gts, 0, 0.5), 1.0);
}

TEST(Ap, NoPredictions) {
  std::vector<GroundTruth> gts{{Box3D::make({0, 0, 0}, {1, 1, 1}), 0}};
  EXPECT_EQ(ap_at_iou({}, gts, 0, 0.25), 0.0);
}

TEST(Ap, SentinelsWithoutGroundTruth) {
  std::vector<DetectionResult> preds{{Box3D::make({0, 0, 0}, {1, 1, 1}), 1, 0.9}};
  EXPECT_EQ(ap_at_iou(preds, {}, 1, 0.25), 0.0);
  EXPECT_FALSE(ap_at_iou(preds, {}, 0, 0.25).has_value());
}

TEST(Ap, DuplicateAndFalsePositiveMatchesOracle) {
  const std::vector<GroundTruth> gts{{Box3D::make({0, 0, 0}, {1, 1, 1}), 0},
                                     {Box3D::make({3, 0, 0}, {1, 1, 1}), 0},
                                     {Box3D::make({6, 0, 0}, {1, 1, 1}), 0}};
  const std::vector<DetectionResult> preds{
      {Box3D::make({0.05, 0, 0}, {1, 1, 1}), 0, 0.9},
      {Box3D::make({0.1, 0, 0}, {1, 1, 1}), 0, 0.8},   // duplicate of gt 0
      {Box3D::make({10, 0, 0}, {1, 1, 1}), 0, 0.7},    // false positive
      {Box3D::make({3.05, 0, 0}, {1, 1, 1}), 0, 0.6}};
  const auto got = ap_at_iou(preds, gts, 0, 0.25);
  const auto want = hcma::verify::ap_oracle(preds, gts, 0, 0.25);
  ASSERT_TRUE(got && want);
  EXPECT_NEAR(*got, *want, 1e-12);
  // Recall 1/3 at precision 1, then 2/3 at precision 2/4; gt 2 is never found.
  EXPECT_NEAR(*got, 1.0 / 3.0 + (1.0 / 3.0) * 0.5, 1e-12);
}

TEST(Ap, FramesKeepPredictionsApart) {
  const Box3D box = Box3D::make({0, 0, 0}, {1, 1, 1});
  std::vector<EvalFrame> frames(2);
  frames[0].ground_truth.push_back({box, 0});
  frames[1].predictions.push_back({box, 0, 0.9});
  EXPECT_EQ(ap_at_iou(frames, 0, 0.25), 0.0);
  frames[0].predictions.push_back({box, 0, 0.5});
  EXPECT_NEAR(*ap_at_iou(frames, 0, 0.25), 0.5, 1e-12);
}

TEST(MeanAp, Examples) {
  const Box3D a = Box3D::make({0, 0, 0}, {1, 1, 1});
  const Box3D b = Box3D::make({4, 0, 0}, {1, 1, 1});
  const std::vector<GroundTruth> gts{{a, 0}, {b, 1}};
  const std::vector<int> one{0}, both{0, 1};
  std::vector<DetectionResult> preds{{a, 0, 1.0}};
  EXPECT_EQ(mean_ap(preds, gts, one, 0.25), 1.0);
  EXPECT_EQ(mean_ap(preds, gts, both, 0.25), 0.5);
}

TEST(MeanAp, RandomFiveClassMatchesOracle) {
  const std::vector<int> classes{0, 1, 2, 3, 4};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = hcma::verify::random_ap_instance(seed, 5);
    EXPECT_NEAR(mean_ap(inst.preds, inst.gts, classes, 0.25),
                hcma::verify::mean_ap_oracle(inst.preds, inst.gts, classes, 0.25), 1e-12)
        << "seed " << seed;
  }
}

}  // namespace
