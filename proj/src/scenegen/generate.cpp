#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "hcma/error.hpp"
#include "hcma/scenegen.hpp"

namespace hcma::scenegen {
namespace {

struct ClassTemplate {
  Vec3 base_size;
  // Signature blobs in box-relative coordinates, each in [0.15, 0.85]^3.
  std::array<Vec3, 3> blobs;
};

ClassTemplate class_template(int class_index) {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^
                      (static_cast<std::uint64_t>(class_index) * 0x100000001b3ULL));
  std::uniform_real_distribution<double> footprint(0.5, 1.3);
  std::uniform_real_distribution<double> height(0.4, 1.4);
  std::uniform_real_distribution<double> rel(0.15, 0.85);
  ClassTemplate t{};
  t.base_size = {footprint(rng), footprint(rng), height(rng)};
  for (auto& b : t.blobs) b = {rel(rng), rel(rng), rel(rng)};
  return t;
}

Vec3 sample_surface(const Box3D& box, std::mt19937_64& rng) {
  const double sx = box.size[0], sy = box.size[1], sz = box.size[2];
  // Top face plus four sides; the floor-facing side is never observed.
  const double areas[5] = {sx * sy, sx * sz, sx * sz, sy * sz, sy * sz};
  std::discrete_distribution<int> face(std::begin(areas), std::end(areas));
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double a = u(rng), b = u(rng);
  Vec3 local{};
  switch (face(rng)) {
    case 0: local = {a * sx, b * sy, 0.5 * sz}; break;
    case 1: local = {a * sx, -0.5 * sy, b * sz}; break;
    case 2: local = {a * sx, 0.5 * sy, b * sz}; break;
    case 3: local = {-0.5 * sx, a * sy, b * sz}; break;
    default: local = {0.5 * sx, a * sy, b * sz}; break;
  }
  return {box.center[0] + local[0], box.center[1] + local[1],
          box.center[2] + local[2]};
}

Vec3 clamp_to_box(const Vec3& p, const Box3D& box) {
  Vec3 out{};
  for (int k = 0; k < 3; ++k) {
    out[k] = std::clamp(p[k], box.center[k] - 0.5 * box.size[k],
                        box.center[k] + 0.5 * box.size[k]);
  }
  return out;
}

bool separated(const Box3D& a, const Box3D& b, double gap) {
  const double gx = std::abs(a.center[0] - b.center[0]) -
                    0.5 * (a.size[0] + b.size[0]);
  const double gy = std::abs(a.center[1] - b.center[1]) -
                    0.5 * (a.size[1] + b.size[1]);
  return gx >= gap || gy >= gap;
}

double distance_to_box(const Vec3& p, const Box3D& box) {
  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::abs(p[k] - box.center[k]) - 0.5 * box.size[k];
    if (d > 0.0) acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

void GenConfig::validate() const {
  if (classes.empty()) throw ConfigError("gen: empty vocabulary");
  if (classes.size() > 64) throw ConfigError("gen: at most 64 classes");
  std::set<std::string> vocab(classes.begin(), classes.end());
  if (vocab.size() != classes.size()) throw ConfigError("gen: duplicate class");
  std::set<std::string> s(seen.begin(), seen.end());
  std::set<std::string> u(unseen.begin(), unseen.end());
  for (const auto& c : s) {
    if (u.count(c)) throw ConfigError("gen: class '" + c + "' both seen and unseen");
  }
  std::set<std::string> both = s;
  both.insert(u.begin(), u.end());
  if (both != vocab) throw ConfigError("gen: seen and unseen must cover the vocabulary");
  if (min_objects > max_objects) throw ConfigError("gen: min_objects > max_objects");
  if (points_per_object < 8) throw ConfigError("gen: points_per_object < 8");
  if (signature_fraction < 0.0 || signature_fraction > 0.9) {
    throw ConfigError("gen: signature_fraction outside [0, 0.9]");
  }
  if (image_width < 8 || image_height < 8) throw ConfigError("gen: image too small");
  if (!(room_size > 1.0)) throw ConfigError("gen: room too small");
  if (!(fov_degrees > 1.0 && fov_degrees < 170.0)) throw ConfigError("gen: bad fov");
}

int GenConfig::class_index(const std::string& name) const {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw ConfigError("gen: unknown class '" + name + "'");
  return static_cast<int>(it - classes.begin());
}

std::vector<int> GenConfig::seen_indices() const {
  std::vector<int> out;
  for (const auto& c : seen) out.push_back(class_index(c));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> GenConfig::unseen_indices() const {
  std::vector<int> out;
  for (const auto& c : unseen) out.push_back(class_index(c));
  std::sort(out.begin(), out.end());
  return out;
}

Scene generate_scene(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 0x632BE59BD9B4E019ULL);
  Scene scene;
  scene.label = "scene_" + std::to_string(seed);
  scene.vocabulary = cfg.classes;

  std::uniform_int_distribution<std::size_t> count(cfg.min_objects,
                                                   cfg.max_objects);
  std::uniform_int_distribution<int> pick_class(
      0, static_cast<int>(cfg.classes.size()) - 1);
  std::uniform_real_distribution<double> jitter(0.92, 1.08);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = 0.5 * cfg.room_size;

  const std::size_t n_objects = count(rng);
  for (std::size_t i = 0; i < n_objects; ++i) {
    const int cls = pick_class(rng);
    const ClassTemplate tpl = class_template(cls);
    const Vec3 size{tpl.base_size[0] * jitter(rng), tpl.base_size[1] * jitter(rng),
                    tpl.base_size[2] * jitter(rng)};
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.placement_retries; ++attempt) {
      const double lo_x = -half + 0.5 * size[0], hi_x = half - 0.5 * size[0];
      const double lo_y = -half + 0.5 * size[1], hi_y = half - 0.5 * size[1];
      const Vec3 center{lo_x + (hi_x - lo_x) * unit(rng),
                        lo_y + (hi_y - lo_y) * unit(rng), 0.5 * size[2]};
      const Box3D box = Box3D::make(center, size, 0.0);
      const bool ok = std::all_of(
          scene.objects.begin(), scene.objects.end(),
          [&](const SceneObject& o) { return separated(o.box, box, cfg.min_gap); });
      if (ok) {
        scene.objects.push_back({box, cls});
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw PlacementError("could not place object " + std::to_string(i) +
                           " without overlap after " +
                           std::to_string(cfg.placement_retries) + " attempts");
    }
  }

  std::normal_distribution<double> noise(0.0, cfg.noise);
  for (const SceneObject& obj : scene.objects) {
    const ClassTemplate tpl = class_template(obj.class_index);
    const auto n_sig = static_cast<std::size_t>(
        std::round(cfg.signature_fraction * cfg.points_per_object));
    for (std::size_t k = 0; k < cfg.points_per_object - n_sig; ++k) {
      Vec3 p = sample_surface(obj.box, rng);
      for (double& c : p) c += noise(rng);
      scene.points.push_back(clamp_to_box(p, obj.box));
    }
    std::normal_distribution<double> spread(0.0, 0.06);
    for (std::size_t k = 0; k < n_sig; ++k) {
      const Vec3& blob = tpl.blobs[k % tpl.blobs.size()];
      Vec3 p{};
      for (int a = 0; a < 3; ++a) {
        p[a] = obj.box.center[a] +
               (blob[a] - 0.5 + spread(rng)) * obj.box.size[a];
      }
      scene.points.push_back(clamp_to_box(p, obj.box));
    }
  }

  // Clutter stays clear of every object by more than the clustering radius.
  const double clearance = cfg.min_gap;
  std::size_t placed_clutter = 0;
  for (std::size_t attempt = 0;
       placed_clutter < cfg.clutter_points && attempt < 20 * cfg.clutter_points + 20;
       ++attempt) {
    const Vec3 p{-half + cfg.room_size * unit(rng), -half + cfg.room_size * unit(rng),
                 0.05 * unit(rng)};
    const bool clear = std::all_of(
        scene.objects.begin(), scene.objects.end(),
        [&](const SceneObject& o) { return distance_to_box(p, o.box) > clearance; });
    if (clear) {
      scene.points.push_back(p);
      ++placed_clutter;
    }
  }

  // Cameras on a ring just outside the room corners, aimed at the point
  // centroid so it always projects to the image centre.
  Vec3 centroid{0.0, 0.0, 0.0};
  if (!scene.points.empty()) {
    for (const Vec3& p : scene.points) {
      for (int k = 0; k < 3; ++k) centroid[k] += p[k];
    }
    for (double& c : centroid) c /= static_cast<double>(scene.points.size());
  }
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double radius = half * std::sqrt(2.0) + 0.4;
  const double fov = cfg.fov_degrees * std::numbers::pi / 180.0;
  for (std::size_t v = 0; v < cfg.views_per_scene; ++v) {
    const double angle =
        phase + 2.0 * std::numbers::pi * static_cast<double>(v) /
                    static_cast<double>(std::max<std::size_t>(cfg.views_per_scene, 1));
    const Vec3 eye{radius * std::cos(angle), radius * std::sin(angle), 2.2};
    CameraView view;
    view.M = geometry::look_at_projection(eye, centroid, fov, cfg.image_width,
                                          cfg.image_height);
    view.scene_label = scene.label;
    view.image = Raster(cfg.image_height, cfg.image_width, kRasterChannels);
    scene.views.push_back(std::move(view));
  }
  for (CameraView& view : scene.views) view.image = render_view(scene, view);
  return scene;
}

std::vector<Scene> generate_dataset(const GenConfig& cfg, std::size_t count,
                                    std::uint64_t first_index) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_scene(cfg, cfg.seed + first_index + i));
  }
  return out;
}

int point_object(const Scene& scene, const Vec3& p) {
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.objects[i].box.contains(p)) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> point_objects(const Scene& scene) {
  std::vector<int> out(scene.points.size());
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    out[i] = point_object(scene, scene.points[i]);
  }
  return out;
}

PointSet view_points(const Scene& scene, const CameraView& view) {
  PointSet out;
  const double w = view.width(), h = view.height();
  for (const Vec3& p : scene.points) {
    const Vec3 uvw = view.project(p);
    if (uvw[2] > 0.0 && uvw[0] >= 0.0 && uvw[0] < w && uvw[1] >= 0.0 &&
        uvw[1] < h) {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<int> visible_objects(const Scene& scene, const CameraView& view,
                                 double min_fraction) {
  const auto owner = point_objects(scene);
  std::vector<std::size_t> total(scene.objects.size()), inside(scene.objects.size());
  const double w = view.width(), h = view.height();
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    if (owner[i] < 0) continue;
    ++total[owner[i]];
    const Vec3 uvw = view.project(scene.points[i]);
    if (uvw[2] > 0.0 && uvw[0] >= 0.0 && uvw[0] < w && uvw[1] >= 0.0 &&
        uvw[1] < h) {
      ++inside[owner[i]];
    }
  }
  std::vector<int> out;
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    if (total[o] > 0 && static_cast<double>(inside[o]) >=
                            min_fraction * static_cast<double>(total[o])) {
      out.push_back(static_cast<int>(o));
    }
  }
  return out;
}

}  // namespace hcma::scenegen
