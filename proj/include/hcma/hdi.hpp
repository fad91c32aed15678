#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcma/encoders.hpp"
#include "hcma/geometry.hpp"
#include "hcma/scenegen.hpp"

// Object-, view- and scene-level (points, image, caption) tuples and the
// frustum pseudo-labelling pipeline that seeds them.

namespace hcma::hdi {

using encoders::Caption;
using geometry::Box2D;
using geometry::Box3D;
using geometry::CameraView;
using geometry::PointSet;
using geometry::Raster;
using scenegen::Scene;

enum class Level { kObject, kView, kScene };

struct HierTuple {
  Level level = Level::kObject;
  std::shared_ptr<const PointSet> points;
  std::shared_ptr<const Raster> image;
  std::optional<Box2D> crop;  // object level only
  Caption caption;
  std::string scene_label;
  std::optional<int> category;  // object level only
  std::optional<Box3D> box;     // object level only
};

struct PseudoLabel {
  Box3D box;
  int class_index = 0;
};

struct PseudoLabelConfig {
  geometry::ClusterConfig cluster;
  double jitter = 1.0;  // pixels
  double max_occlusion = 0.25;
  std::uint64_t seed = 0;
};

// oracle_detect_2d -> backproject_box2d -> fit_box3d for every detection of
// the requested classes. Detections whose dominant cluster has fewer than
// cluster.min_points points are dropped.
std::vector<PseudoLabel> build_pseudo_labels(const Scene& scene,
                                             const CameraView& view,
                                             const std::vector<int>& classes,
                                             const PseudoLabelConfig& cfg);

Caption merge_captions(std::span<const Caption> parts);

// A 3D box to turn into an object tuple; unlabeled boxes get an empty
// caption.
struct ObjectSpec {
  Box3D box;
  std::optional<int> class_index;
};

struct ObjectLevel {
  std::vector<HierTuple> tuples;
  std::vector<std::size_t> source;  // index into `objects` per tuple
  std::size_t skipped = 0;  // boxes behind the camera or outside the image
};

ObjectLevel build_object_level(const CameraView& view,
                               std::shared_ptr<const Raster> image,
                               const PointSet& view_points,
                               std::span<const ObjectSpec> objects,
                               const std::vector<std::string>& vocabulary);

HierTuple build_view_level(std::span<const HierTuple> object_tuples,
                           const CameraView& view,
                           std::shared_ptr<const PointSet> view_points,
                           std::shared_ptr<const Raster> image);

HierTuple build_scene_level(std::span<const HierTuple> view_tuples,
                            const Scene& scene,
                            std::shared_ptr<const Raster> topdown = nullptr);

}  // namespace hcma::hdi
