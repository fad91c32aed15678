#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hcma/geometry.hpp"

// Synthetic indoor scenes: axis-aligned objects on a ground plane with
// class-specific surface/interior point signatures, background clutter, a ring
// of perspective cameras, renderers and an oracle 2D detector.

namespace hcma::scenegen {

using geometry::Box2D;
using geometry::Box3D;
using geometry::CameraView;
using geometry::PointSet;
using geometry::Raster;
using geometry::Vec3;

// Every raster the generator produces has 4 channels: RGB class colour plus
// an intensity channel (occupancy for views, normalised height for the
// top-down map).
inline constexpr int kRasterChannels = 4;
inline constexpr std::array<double, 3> kClutterColor{0.1, 0.1, 0.1};
// Occupied top-down cells never store an intensity below this value.
inline constexpr double kTopdownFloor = 0.05;
inline constexpr int kTopdownResolution = 256;

// Distinct palette colour per class index (up to 64 classes). Components are
// drawn from {0.25, 0.5, 0.75, 1.0} so they never collide with the clutter
// colour.
std::array<double, 3> class_color(int class_index);
// Inverse of class_color; -1 for clutter, empty pixels and unknown colours.
int decode_class_color(double r, double g, double b);

struct SceneObject {
  Box3D box;
  int class_index = 0;
  bool operator==(const SceneObject&) const = default;
};

struct Scene {
  std::string label;
  PointSet points;
  std::vector<SceneObject> objects;
  std::vector<CameraView> views;
  std::vector<std::string> vocabulary;
  bool operator==(const Scene&) const = default;
};

struct GenConfig {
  std::size_t num_scenes = 64;
  std::size_t min_objects = 3;
  std::size_t max_objects = 5;
  std::vector<std::string> classes{"chair", "table", "sofa",    "bed",
                                   "cabinet", "lamp", "toilet", "desk"};
  std::vector<std::string> seen{"chair", "table", "sofa",
                                "bed",   "cabinet", "desk"};
  std::vector<std::string> unseen{"lamp", "toilet"};
  std::size_t points_per_object = 240;
  // Fraction of an object's points that form its class signature.
  double signature_fraction = 0.3;
  std::size_t clutter_points = 120;
  double noise = 0.005;
  std::size_t views_per_scene = 3;
  int image_width = 64;
  int image_height = 48;
  double fov_degrees = 60.0;
  double room_size = 6.0;
  double min_gap = 0.4;
  std::size_t placement_retries = 400;
  std::uint64_t seed = 0;

  // Throws ConfigError on an inconsistent split or geometry.
  void validate() const;
  int class_index(const std::string& name) const;
  std::vector<int> seen_indices() const;
  std::vector<int> unseen_indices() const;
};

// Deterministic in (cfg, seed). Throws PlacementError when the objects cannot
// be placed without overlap.
Scene generate_scene(const GenConfig& cfg, std::uint64_t seed);
// Scene i uses seed cfg.seed + first_index + i.
std::vector<Scene> generate_dataset(const GenConfig& cfg, std::size_t count,
                                    std::uint64_t first_index = 0);

// Index of the object whose box contains p, or -1.
int point_object(const Scene& scene, const Vec3& p);
std::vector<int> point_objects(const Scene& scene);

// Points in front of the camera that project inside the image.
PointSet view_points(const Scene& scene, const CameraView& view);
// Objects with at least `min_fraction` of their points inside the view.
std::vector<int> visible_objects(const Scene& scene, const CameraView& view,
                                 double min_fraction = 0.5);

Raster render_topdown(const Scene& scene, int resolution = kTopdownResolution);
Raster render_view(const Scene& scene, const CameraView& cam);

struct Detection2D {
  Box2D box;
  int class_index = 0;
  int object_index = -1;
};

// Stand-in for an open-vocabulary 2D detector: projects each ground-truth
// object of a requested class that is fully inside the image and at most
// `max_occlusion` covered by another object's projection, then perturbs each
// coordinate by U(-jitter, jitter).
std::vector<Detection2D> oracle_detect_2d(const Scene& scene,
                                          const CameraView& view,
                                          const std::vector<int>& classes,
                                          double jitter, std::uint64_t seed,
                                          double max_occlusion = 0.25);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& line);
void save_dataset(const std::filesystem::path& path,
                  const std::vector<Scene>& scenes);
std::vector<Scene> load_dataset(const std::filesystem::path& path);

}  // namespace hcma::scenegen
