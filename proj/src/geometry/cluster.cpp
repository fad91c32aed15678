#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "hcma/error.hpp"
#include "hcma/geometry.hpp"
#include "hcma/simd.hpp"

namespace hcma::geometry {

std::vector<int> dbscan(std::span<const Vec3> points, double eps,
                        std::size_t min_pts) {
  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  const std::size_t n = points.size();
  std::vector<double> xs(n), ys(n), zs(n), d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i][0];
    ys[i] = points[i][1];
    zs[i] = points[i][2];
  }
  const double eps2 = eps * eps;
  const auto& kernels = simd::active();
  auto neighbours = [&](std::size_t i) {
    kernels.sq_dist3(xs.data(), ys.data(), zs.data(), xs[i], ys[i], zs[i],
                     d2.data(), n);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      if (d2[j] <= eps2) out.push_back(j);
    }
    return out;
  };

  std::vector<int> label(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    auto seeds = neighbours(i);
    if (seeds.size() < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    label[i] = c;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (label[j] == kNoise) label[j] = c;
      if (label[j] != kUnvisited) continue;
      label[j] = c;
      auto nb = neighbours(j);
      if (nb.size() >= min_pts) queue.insert(queue.end(), nb.begin(), nb.end());
    }
  }
  return label;
}

PointSet backproject_box2d(const Box2D& box2d, const CameraView& cam,
                           std::span<const Vec3> points,
                           const ClusterConfig& cfg) {
  PointSet frustum;
  for (const Vec3& p : points) {
    const Vec3 uvw = cam.project(p);
    if (uvw[2] > 0.0 && box2d.contains({uvw[0], uvw[1]})) frustum.push_back(p);
  }
  if (frustum.empty()) return {};
  const auto labels = dbscan(frustum, cfg.eps, cfg.min_pts);
  std::map<int, std::size_t> counts;
  for (int l : labels) {
    if (l >= 0) ++counts[l];
  }
  if (counts.empty()) return {};
  int best = -1;
  std::size_t best_count = 0;
  for (const auto& [l, cnt] : counts) {
    if (cnt > best_count) {
      best = l;
      best_count = cnt;
    }
  }
  PointSet out;
  out.reserve(best_count);
  for (std::size_t i = 0; i < frustum.size(); ++i) {
    if (labels[i] == best) out.push_back(frustum[i]);
  }
  return out;
}

Box3D fit_box3d(std::span<const Vec3> points, const ClusterConfig& cfg) {
  if (points.size() < cfg.min_points || points.empty()) {
    throw DegenerateInputError("fit_box3d: fewer than min_points points");
  }
  double heading = 0.0;
  if (cfg.pca_yaw) {
    double mx = 0.0, my = 0.0;
    for (const Vec3& p : points) {
      mx += p[0];
      my += p[1];
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double cxx = 0.0, cyy = 0.0, cxy = 0.0;
    for (const Vec3& p : points) {
      const double dx = p[0] - mx, dy = p[1] - my;
      cxx += dx * dx;
      cyy += dy * dy;
      cxy += dx * dy;
    }
    heading = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  }
  const double c = std::cos(heading), s = std::sin(heading);
  Vec3 lo{std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (const Vec3& p : points) {
    const Vec3 local{c * p[0] + s * p[1], -s * p[0] + c * p[1], p[2]};
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], local[k]);
      hi[k] = std::max(hi[k], local[k]);
    }
  }
  Vec3 size{}, local_center{};
  for (int k = 0; k < 3; ++k) {
    size[k] = std::max(hi[k] - lo[k], cfg.min_size);
    local_center[k] = 0.5 * (lo[k] + hi[k]);
  }
  const Vec3 center{c * local_center[0] - s * local_center[1],
                    s * local_center[0] + c * local_center[1], local_center[2]};
  return Box3D::make(center, size, heading);
}

}  // namespace hcma::geometry
