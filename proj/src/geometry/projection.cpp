#include <algorithm>
#include <cmath>
#include <limits>

#include "hcma/error.hpp"
#include "hcma/geometry.hpp"

namespace hcma::geometry {
namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(n > 0.0)) throw DegenerateInputError("zero-length direction");
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

Vec3 CameraView::project(const Vec3& p) const {
  const double u = M[0] * p[0] + M[1] * p[1] + M[2] * p[2] + M[3];
  const double v = M[4] * p[0] + M[5] * p[1] + M[6] * p[2] + M[7];
  const double w = M[8] * p[0] + M[9] * p[1] + M[10] * p[2] + M[11];
  if (w <= 0.0) return {u, v, w};
  return {u / w, v / w, w};
}

ProjectionMatrix look_at_projection(const Vec3& eye, const Vec3& target,
                                    double fov_x_radians, int width,
                                    int height) {
  const Vec3 forward = normalized({target[0] - eye[0], target[1] - eye[1],
                                   target[2] - eye[2]});
  const Vec3 right = normalized(cross(forward, {0.0, 0.0, 1.0}));
  const Vec3 down = cross(forward, right);
  const double f = 0.5 * width / std::tan(0.5 * fov_x_radians);
  const double cx = 0.5 * width, cy = 0.5 * height;
  const Vec3 rows[3] = {right, down, forward};
  double rt[3][4];
  for (int r = 0; r < 3; ++r) {
    rt[r][0] = rows[r][0];
    rt[r][1] = rows[r][1];
    rt[r][2] = rows[r][2];
    rt[r][3] = -(rows[r][0] * eye[0] + rows[r][1] * eye[1] + rows[r][2] * eye[2]);
  }
  const double K[3][3] = {{f, 0.0, cx}, {0.0, f, cy}, {0.0, 0.0, 1.0}};
  ProjectionMatrix M{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += K[r][k] * rt[k][c];
      M[r * 4 + c] = acc;
    }
  }
  return M;
}

Box2D project_box3d_to_2d(const Box3D& box, const CameraView& cam) {
  double umin = std::numeric_limits<double>::infinity();
  double vmin = umin, umax = -umin, vmax = -umin;
  for (const Vec3& corner : box.corners()) {
    const Vec3 uvw = cam.project(corner);
    if (!(uvw[2] > 0.0)) {
      throw BehindCameraError("box corner at or behind the camera plane");
    }
    umin = std::min(umin, uvw[0]);
    umax = std::max(umax, uvw[0]);
    vmin = std::min(vmin, uvw[1]);
    vmax = std::max(vmax, uvw[1]);
  }
  const double w = cam.width(), h = cam.height();
  auto clamp = [](double v, double hi) { return std::clamp(v, 0.0, hi); };
  return Box2D::make({clamp(umin, w), clamp(vmin, h)},
                     {clamp(umax, w), clamp(vmax, h)});
}

}  // namespace hcma::geometry
