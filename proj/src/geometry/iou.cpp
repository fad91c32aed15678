#include <algorithm>
#include <cmath>
#include <vector>

#include "hcma/geometry.hpp"

namespace hcma::geometry {
namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

Vec2 line_intersection(const Vec2& p, const Vec2& q, const Vec2& a,
                       const Vec2& b) {
  const double a1 = q[1] - p[1], b1 = p[0] - q[0];
  const double c1 = a1 * p[0] + b1 * p[1];
  const double a2 = b[1] - a[1], b2 = a[0] - b[0];
  const double c2 = a2 * a[0] + b2 * a[1];
  const double det = a1 * b2 - a2 * b1;
  if (std::abs(det) < 1e-300) return p;
  return {(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det};
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(a);
}

}  // namespace

double convex_intersection_area(std::span<const Vec2> a,
                                std::span<const Vec2> b) {
  std::vector<Vec2> out(a.begin(), a.end());
  for (std::size_t i = 0; i < b.size() && !out.empty(); ++i) {
    const Vec2& ea = b[i];
    const Vec2& eb = b[(i + 1) % b.size()];
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t k = 0; k < in.size(); ++k) {
      const Vec2& cur = in[k];
      const Vec2& prev = in[(k + in.size() - 1) % in.size()];
      const bool cur_in = cross2(ea, eb, cur) >= 0.0;
      const bool prev_in = cross2(ea, eb, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) out.push_back(line_intersection(prev, cur, ea, eb));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(line_intersection(prev, cur, ea, eb));
      }
    }
  }
  return out.size() < 3 ? 0.0 : polygon_area(out);
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double za0 = a.center[2] - 0.5 * a.size[2];
  const double za1 = a.center[2] + 0.5 * a.size[2];
  const double zb0 = b.center[2] - 0.5 * b.size[2];
  const double zb1 = b.center[2] + 0.5 * b.size[2];
  const double zover = std::min(za1, zb1) - std::max(za0, zb0);
  if (zover <= 0.0) return 0.0;

  double area = 0.0;
  if (a.heading == 0.0 && b.heading == 0.0) {
    const double ox = std::min(a.center[0] + 0.5 * a.size[0],
                               b.center[0] + 0.5 * b.size[0]) -
                      std::max(a.center[0] - 0.5 * a.size[0],
                               b.center[0] - 0.5 * b.size[0]);
    const double oy = std::min(a.center[1] + 0.5 * a.size[1],
                               b.center[1] + 0.5 * b.size[1]) -
                      std::max(a.center[1] - 0.5 * a.size[1],
                               b.center[1] - 0.5 * b.size[1]);
    area = (ox > 0.0 && oy > 0.0) ? ox * oy : 0.0;
  } else {
    const auto fa = a.footprint();
    const auto fb = b.footprint();
    area = convex_intersection_area(fa, fb);
  }
  const double inter = area * zover;
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace hcma::geometry
