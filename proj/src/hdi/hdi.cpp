#include "hcma/hdi.hpp"

#include "hcma/error.hpp"

namespace hcma::hdi {
namespace {

void check_labels(std::span<const HierTuple> parts, const std::string& label) {
  for (const auto& t : parts) {
    if (t.scene_label != label) {
      throw LabelMismatchError("tuple from '" + t.scene_label +
                               "' merged into '" + label + "'");
    }
  }
}

}  // namespace

std::vector<PseudoLabel> build_pseudo_labels(const Scene& scene,
                                             const CameraView& view,
                                             const std::vector<int>& classes,
                                             const PseudoLabelConfig& cfg) {
  std::vector<PseudoLabel> out;
  if (classes.empty()) return out;
  const auto detections = scenegen::oracle_detect_2d(
      scene, view, classes, cfg.jitter, cfg.seed, cfg.max_occlusion);
  for (const auto& det : detections) {
    const PointSet cluster =
        geometry::backproject_box2d(det.box, view, scene.points, cfg.cluster);
    if (cluster.size() < cfg.cluster.min_points) continue;
    out.push_back({geometry::fit_box3d(cluster, cfg.cluster), det.class_index});
  }
  return out;
}

Caption merge_captions(std::span<const Caption> parts) {
  Caption out;
  for (const auto& p : parts) out.insert(p.begin(), p.end());
  return out;
}

ObjectLevel build_object_level(const CameraView& view,
                               std::shared_ptr<const Raster> image,
                               const PointSet& view_points,
                               std::span<const ObjectSpec> objects,
                               const std::vector<std::string>& vocabulary) {
  ObjectLevel out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const ObjectSpec& obj = objects[i];
    Box2D crop;
    try {
      crop = geometry::project_box3d_to_2d(obj.box, view);
    } catch (const BehindCameraError&) {
      ++out.skipped;
      continue;
    }
    if (!(crop.area() > 0.0)) {
      ++out.skipped;
      continue;
    }
    auto inside = std::make_shared<PointSet>();
    for (const auto& p : view_points) {
      if (obj.box.contains(p)) inside->push_back(p);
    }
    HierTuple t;
    t.level = Level::kObject;
    t.points = std::move(inside);
    t.image = image;
    t.crop = crop;
    if (obj.class_index) {
      t.caption.insert(vocabulary.at(*obj.class_index));
      t.category = obj.class_index;
    }
    t.scene_label = view.scene_label;
    t.box = obj.box;
    out.tuples.push_back(std::move(t));
    out.source.push_back(i);
  }
  return out;
}

HierTuple build_view_level(std::span<const HierTuple> object_tuples,
                           const CameraView& view,
                           std::shared_ptr<const PointSet> view_points,
                           std::shared_ptr<const Raster> image) {
  check_labels(object_tuples, view.scene_label);
  std::vector<Caption> parts;
  for (const auto& t : object_tuples) parts.push_back(t.caption);
  HierTuple v;
  v.level = Level::kView;
  v.points = std::move(view_points);
  v.image = std::move(image);
  v.caption = merge_captions(parts);
  v.scene_label = view.scene_label;
  return v;
}

HierTuple build_scene_level(std::span<const HierTuple> view_tuples,
                            const Scene& scene,
                            std::shared_ptr<const Raster> topdown) {
  check_labels(view_tuples, scene.label);
  std::vector<Caption> parts;
  for (const auto& t : view_tuples) parts.push_back(t.caption);
  HierTuple s;
  s.level = Level::kScene;
  s.points = std::make_shared<const PointSet>(scene.points);
  s.image = topdown ? std::move(topdown)
                    : std::make_shared<const Raster>(scenegen::render_topdown(scene));
  s.caption = merge_captions(parts);
  s.scene_label = scene.label;
  return s;
}

}  // namespace hcma::hdi
