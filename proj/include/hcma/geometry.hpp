#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Boxes, pinhole projection, frustum back-projection with density clustering,
// box fitting, oriented IoU and average-precision metrics.

namespace hcma::geometry {

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;
using PointSet = std::vector<Vec3>;

// Wraps an angle into [-pi, pi).
double wrap_angle(double radians);

// Oriented 3D box: center, strictly positive extents, yaw about +z.
struct Box3D {
  Vec3 center{};
  Vec3 size{1.0, 1.0, 1.0};
  double heading = 0.0;

  // Validates the size and normalises the heading.
  static Box3D make(const Vec3& center, const Vec3& size, double heading = 0.0);

  double volume() const { return size[0] * size[1] * size[2]; }
  std::array<Vec3, 8> corners() const;
  // Ground-plane footprint, counter-clockwise.
  std::array<Vec2, 4> footprint() const;
  bool contains(const Vec3& p, double tol = 1e-9) const;
  bool operator==(const Box3D&) const = default;
};

struct Box2D {
  Vec2 min{};
  Vec2 max{};

  static Box2D make(const Vec2& min, const Vec2& max);
  double width() const { return max[0] - min[0]; }
  double height() const { return max[1] - min[1]; }
  double area() const { return width() * height(); }
  bool contains(const Vec2& p) const {
    return p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1];
  }
  bool operator==(const Box2D&) const = default;
};

// H x W x C image with values in [0, 1], row-major with interleaved channels.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int h, int w, int c) : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool pixel_nonzero(int y, int x) const;
  std::size_t nonzero_pixels() const;
  bool operator==(const Raster&) const = default;
};

using ProjectionMatrix = std::array<double, 12>;  // 3x4, row-major

struct CameraView {
  ProjectionMatrix M{};
  Raster image;
  std::string scene_label;

  int width() const { return image.width; }
  int height() const { return image.height; }
  // Homogeneous projection; returns (u, v, depth) with depth the third
  // homogeneous coordinate.
  Vec3 project(const Vec3& p) const;
  bool operator==(const CameraView&) const = default;
};

// Builds M = K [R | t] for a camera at `eye` looking at `target` with +z up.
ProjectionMatrix look_at_projection(const Vec3& eye, const Vec3& target,
                                    double fov_x_radians, int width, int height);

struct DetectionResult {
  Box3D box;
  int class_index = 0;
  double confidence = 0.0;
};

struct GroundTruth {
  Box3D box;
  int class_index = 0;
};

struct ClusterConfig {
  double eps = 0.3;
  std::size_t min_pts = 5;      // neighbourhood size including the point itself
  std::size_t min_points = 5;   // fit_box3d precondition
  double min_size = 0.05;       // per-axis size floor of fitted boxes
  bool pca_yaw = false;
};

Box2D project_box3d_to_2d(const Box3D& box, const CameraView& cam);

// Density clustering (DBSCAN) over `points`; returns one label per point,
// -1 for noise. Clusters are numbered in order of discovery, scanning points
// by index.
std::vector<int> dbscan(std::span<const Vec3> points, double eps,
                        std::size_t min_pts);

// Points that project inside box2d and belong to the largest density
// cluster among them, in input order.
PointSet backproject_box2d(const Box2D& box2d, const CameraView& cam,
                           std::span<const Vec3> points,
                           const ClusterConfig& cfg);

Box3D fit_box3d(std::span<const Vec3> points, const ClusterConfig& cfg = {});

double iou3d(const Box3D& a, const Box3D& b);

// Area of the intersection of two convex counter-clockwise polygons.
double convex_intersection_area(std::span<const Vec2> a,
                                std::span<const Vec2> b);

// One evaluation frame: predictions are only matched against ground truth of
// the same frame.
struct EvalFrame {
  std::vector<DetectionResult> predictions;
  std::vector<GroundTruth> ground_truth;
};

// Average precision with all-point envelope interpolation. nullopt when the
// class has neither predictions nor ground truth; 0 when it only has
// predictions.
std::optional<double> ap_at_iou(std::span<const EvalFrame> frames, int cls,
                                double threshold);
std::optional<double> ap_at_iou(std::span<const DetectionResult> preds,
                                std::span<const GroundTruth> gts, int cls,
                                double threshold);

// Mean of ap_at_iou over the classes in `classes` that occur in ground truth.
// Returns 0 when none does.
double mean_ap(std::span<const EvalFrame> frames, std::span<const int> classes,
               double threshold);
double mean_ap(std::span<const DetectionResult> preds,
               std::span<const GroundTruth> gts, std::span<const int> classes,
               double threshold);

}  // namespace hcma::geometry
