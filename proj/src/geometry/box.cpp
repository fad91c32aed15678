#include <cmath>
#include <numbers>
#include <string>

#include "hcma/error.hpp"
#include "hcma/geometry.hpp"

namespace hcma::geometry {

double wrap_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = radians - kTwoPi * std::floor((radians + std::numbers::pi) / kTwoPi);
  // floor() rounding can leave w == pi for inputs a hair below an odd
  // multiple of pi.
  if (w >= std::numbers::pi) w -= kTwoPi;
  return w;
}

Box3D Box3D::make(const Vec3& center, const Vec3& size, double heading) {
  for (double s : size) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw DegenerateInputError("Box3D size components must be positive");
    }
  }
  for (double c : center) {
    if (!std::isfinite(c)) throw NumericError("Box3D center must be finite");
  }
  if (!std::isfinite(heading)) throw NumericError("Box3D heading must be finite");
  return Box3D{center, size, wrap_angle(heading)};
}

std::array<Vec3, 8> Box3D::corners() const {
  const double c = std::cos(heading), s = std::sin(heading);
  std::array<Vec3, 8> out{};
  int k = 0;
  for (int dz : {-1, 1}) {
    for (int dy : {-1, 1}) {
      for (int dx : {-1, 1}) {
        const double lx = 0.5 * dx * size[0];
        const double ly = 0.5 * dy * size[1];
        out[k++] = {center[0] + c * lx - s * ly, center[1] + s * lx + c * ly,
                    center[2] + 0.5 * dz * size[2]};
      }
    }
  }
  return out;
}

std::array<Vec2, 4> Box3D::footprint() const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double hx = 0.5 * size[0], hy = 0.5 * size[1];
  const double local[4][2] = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
  std::array<Vec2, 4> out{};
  for (int i = 0; i < 4; ++i) {
    out[i] = {center[0] + c * local[i][0] - s * local[i][1],
              center[1] + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

bool Box3D::contains(const Vec3& p, double tol) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double dx = p[0] - center[0], dy = p[1] - center[1];
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double lz = p[2] - center[2];
  return std::abs(lx) <= 0.5 * size[0] + tol &&
         std::abs(ly) <= 0.5 * size[1] + tol &&
         std::abs(lz) <= 0.5 * size[2] + tol;
}

Box2D Box2D::make(const Vec2& min, const Vec2& max) {
  if (max[0] < min[0] || max[1] < min[1]) {
    throw DegenerateInputError("Box2D max corner must dominate min corner");
  }
  return Box2D{min, max};
}

bool Raster::pixel_nonzero(int y, int x) const {
  for (int c = 0; c < channels; ++c) {
    if (at(y, x, c) != 0.0) return true;
  }
  return false;
}

std::size_t Raster::nonzero_pixels() const {
  std::size_t n = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) n += pixel_nonzero(y, x) ? 1 : 0;
  }
  return n;
}

}  // namespace hcma::geometry
