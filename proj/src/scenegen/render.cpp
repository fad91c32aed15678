#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hcma/error.hpp"
#include "hcma/scenegen.hpp"

namespace hcma::scenegen {
namespace {

constexpr double kLevels[4] = {0.25, 0.5, 0.75, 1.0};

int level_index(double v) {
  for (int i = 0; i < 4; ++i) {
    if (std::abs(v - kLevels[i]) < 1e-6) return i;
  }
  return -1;
}

std::array<double, 3> point_color(int owner, const Scene& scene) {
  if (owner < 0) return kClutterColor;
  return class_color(scene.objects[owner].class_index);
}

}  // namespace

std::array<double, 3> class_color(int class_index) {
  if (class_index < 0 || class_index >= 64) {
    throw ConfigError("class_color: class index outside [0, 64)");
  }
  return {kLevels[class_index % 4], kLevels[(class_index / 4) % 4],
          kLevels[(class_index / 16) % 4]};
}

int decode_class_color(double r, double g, double b) {
  const int ir = level_index(r), ig = level_index(g), ib = level_index(b);
  if (ir < 0 || ig < 0 || ib < 0) return -1;
  return ir + 4 * ig + 16 * ib;
}

Raster render_topdown(const Scene& scene, int resolution) {
  if (scene.points.empty()) {
    throw DegenerateInputError("render_topdown: empty point set");
  }
  if (resolution <= 0) throw ConfigError("render_topdown: resolution must be positive");
  double minx = std::numeric_limits<double>::infinity(), miny = minx, minz = minx;
  double maxx = -minx, maxy = -minx, maxz = -minx;
  for (const Vec3& p : scene.points) {
    minx = std::min(minx, p[0]);
    maxx = std::max(maxx, p[0]);
    miny = std::min(miny, p[1]);
    maxy = std::max(maxy, p[1]);
    minz = std::min(minz, p[2]);
    maxz = std::max(maxz, p[2]);
  }
  const double extent = std::max({maxx - minx, maxy - miny, 1e-9});
  const double cell = extent / resolution;
  const double zrange = maxz - minz;

  const auto owner = point_objects(scene);
  Raster out(resolution, resolution, kRasterChannels);
  std::vector<double> top(static_cast<std::size_t>(resolution) * resolution,
                          -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Vec3& p = scene.points[i];
    const int ix = std::min(resolution - 1, static_cast<int>((p[0] - minx) / cell));
    const int iy = std::min(resolution - 1, static_cast<int>((p[1] - miny) / cell));
    double& best = top[static_cast<std::size_t>(iy) * resolution + ix];
    if (p[2] <= best) continue;
    best = p[2];
    const double t = zrange > 0.0 ? (p[2] - minz) / zrange : 1.0;
    const auto color = point_color(owner[i], scene);
    for (int c = 0; c < 3; ++c) out.at(iy, ix, c) = color[c];
    out.at(iy, ix, 3) = std::max(kTopdownFloor, t);
  }
  return out;
}

Raster render_view(const Scene& scene, const CameraView& cam) {
  Raster out(cam.height(), cam.width(), kRasterChannels);
  std::vector<double> depth(static_cast<std::size_t>(cam.height()) * cam.width(),
                            std::numeric_limits<double>::infinity());
  const auto owner = point_objects(scene);
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Vec3 uvw = cam.project(scene.points[i]);
    if (!(uvw[2] > 0.0)) continue;
    if (uvw[0] < 0.0 || uvw[1] < 0.0) continue;
    const int x = static_cast<int>(uvw[0]);
    const int y = static_cast<int>(uvw[1]);
    if (x >= cam.width() || y >= cam.height()) continue;
    double& z = depth[static_cast<std::size_t>(y) * cam.width() + x];
    if (uvw[2] >= z) continue;
    z = uvw[2];
    const auto color = point_color(owner[i], scene);
    for (int c = 0; c < 3; ++c) out.at(y, x, c) = color[c];
    out.at(y, x, 3) = 1.0;
  }
  return out;
}

std::vector<Detection2D> oracle_detect_2d(const Scene& scene,
                                          const CameraView& view,
                                          const std::vector<int>& classes,
                                          double jitter, std::uint64_t seed,
                                          double max_occlusion) {
  std::vector<Detection2D> out;
  if (classes.empty()) return out;
  for (int c : classes) {
    if (c < 0 || c >= static_cast<int>(scene.vocabulary.size())) {
      throw ConfigError("oracle_detect_2d: class outside the scene vocabulary");
    }
  }
  // Unclamped projected hulls; nullopt when any corner is behind the camera.
  struct Hull {
    bool valid = false;
    double u0, v0, u1, v1;
  };
  std::vector<Hull> hulls(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    Hull h{true, std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};
    for (const Vec3& corner : scene.objects[i].box.corners()) {
      const Vec3 uvw = view.project(corner);
      if (!(uvw[2] > 0.0)) {
        h.valid = false;
        break;
      }
      h.u0 = std::min(h.u0, uvw[0]);
      h.v0 = std::min(h.v0, uvw[1]);
      h.u1 = std::max(h.u1, uvw[0]);
      h.v1 = std::max(h.v1, uvw[1]);
    }
    hulls[i] = h;
  }
  std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ULL);
  std::uniform_real_distribution<double> perturb(-1.0, 1.0);
  const double w = view.width(), hgt = view.height();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& obj = scene.objects[i];
    if (std::find(classes.begin(), classes.end(), obj.class_index) == classes.end()) {
      continue;
    }
    const Hull& h = hulls[i];
    if (!h.valid || h.u0 < 0.0 || h.v0 < 0.0 || h.u1 > w || h.v1 > hgt) continue;
    const double area = (h.u1 - h.u0) * (h.v1 - h.v0);
    if (!(area > 0.0)) continue;
    bool occluded = false;
    for (std::size_t j = 0; j < scene.objects.size() && !occluded; ++j) {
      if (j == i || !hulls[j].valid) continue;
      const double ow = std::min(h.u1, hulls[j].u1) - std::max(h.u0, hulls[j].u0);
      const double oh = std::min(h.v1, hulls[j].v1) - std::max(h.v0, hulls[j].v0);
      if (ow > 0.0 && oh > 0.0 && ow * oh > max_occlusion * area) occluded = true;
    }
    if (occluded) continue;
    Box2D box = geometry::project_box3d_to_2d(obj.box, view);
    if (jitter > 0.0) {
      double c[4] = {box.min[0], box.min[1], box.max[0], box.max[1]};
      for (double& v : c) v += jitter * perturb(rng);
      c[0] = std::clamp(c[0], 0.0, w);
      c[2] = std::clamp(c[2], 0.0, w);
      c[1] = std::clamp(c[1], 0.0, hgt);
      c[3] = std::clamp(c[3], 0.0, hgt);
      if (c[0] > c[2]) std::swap(c[0], c[2]);
      if (c[1] > c[3]) std::swap(c[1], c[3]);
      box = Box2D::make({c[0], c[1]}, {c[2], c[3]});
    }
    out.push_back({box, obj.class_index, static_cast<int>(i)});
  }
  return out;
}

}  // namespace hcma::scenegen
