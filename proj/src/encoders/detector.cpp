#include <algorithm>
#include <cmath>
#include <limits>

#include "hcma/encoders.hpp"
#include "hcma/error.hpp"
#include "hcma/simd.hpp"

namespace hcma::encoders {

std::vector<std::size_t> farthest_point_sample(const PointSet& points,
                                               std::size_t count,
                                               std::size_t start) {
  const std::size_t n = points.size();
  if (n == 0) throw DegenerateInputError("farthest_point_sample: no points");
  std::vector<double> xs(n), ys(n), zs(n), d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i][0];
    ys[i] = points[i][1];
    zs[i] = points[i][2];
  }
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> out;
  out.reserve(count);
  std::size_t current = start % n;
  const auto& k = simd::active();
  for (std::size_t s = 0; s < count; ++s) {
    out.push_back(current);
    k.sq_dist3(xs.data(), ys.data(), zs.data(), xs[current], ys[current],
               zs[current], d2.data(), n);
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], d2[i]);
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    // Fewer distinct points than queries: restart the sweep cyclically.
    current = far_d > 0.0 ? far : (out.back() + 1) % n;
  }
  return out;
}

PointGroups group_points(const PointSet& points, const DetectorConfig& cfg,
                         std::uint64_t seed) {
  if (points.empty()) throw DegenerateInputError("detect_points: empty point set");
  const std::size_t n = points.size();
  const auto seeds = farthest_point_sample(points, cfg.queries, seed % n);
  std::vector<double> xs(n), ys(n), zs(n), d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i][0];
    ys[i] = points[i][1];
    zs[i] = points[i][2];
  }
  const double r2 = cfg.radius * cfg.radius;
  PointGroups g;
  g.offsets.push_back(0);
  std::vector<double> rows;
  for (std::size_t s : seeds) {
    const Vec3& c = points[s];
    g.seeds.push_back(c);
    simd::active().sq_dist3(xs.data(), ys.data(), zs.data(), c[0], c[1], c[2],
                            d2.data(), n);
    std::vector<std::size_t> ball;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= r2) ball.push_back(i);
    }
    std::vector<std::size_t> chosen;
    if (ball.size() <= cfg.neighbors) {
      chosen = ball;
    } else {
      for (std::size_t k = 0; k < cfg.neighbors; ++k) {
        chosen.push_back(ball[k * ball.size() / cfg.neighbors]);
      }
    }
    for (std::size_t i : chosen) {
      const Vec3& p = points[i];
      rows.insert(rows.end(), {(p[0] - c[0]) / cfg.radius, (p[1] - c[1]) / cfg.radius,
                               (p[2] - c[2]) / cfg.radius, p[2]});
    }
    g.offsets.push_back(g.offsets.back() + chosen.size());
  }
  g.inputs = Matrix(g.offsets.back(), 4, std::move(rows));
  return g;
}

ad::ParameterSet init_detector_params(const DetectorConfig& cfg,
                                      std::uint64_t seed) {
  ad::ParameterSet p;
  auto scaled = [](Matrix m, double s) {
    for (double& v : m.data) v *= s;
    return m;
  };
  p.add("w1", ad::xavier_uniform(4, cfg.hidden1, seed + 1));
  p.add("b1", Matrix(1, cfg.hidden1));
  p.add("w2", ad::xavier_uniform(2 * cfg.hidden1 + 1, cfg.hidden2, seed + 2));
  p.add("b2", Matrix(1, cfg.hidden2));
  p.add("wf", ad::xavier_uniform(cfg.hidden2, cfg.dim, seed + 3));
  p.add("bf", Matrix(1, cfg.dim));
  p.add("wc", scaled(ad::xavier_uniform(cfg.hidden2, 3, seed + 4), 0.1));
  p.add("bc", Matrix(1, 3));
  p.add("ws", scaled(ad::xavier_uniform(cfg.hidden2, 3, seed + 5), 0.1));
  p.add("bs", Matrix(1, 3, std::log(cfg.init_size)));
  p.add("wh", scaled(ad::xavier_uniform(cfg.hidden2, 1, seed + 6), 0.1));
  p.add("bh", Matrix(1, 1));
  p.add("wo", scaled(ad::xavier_uniform(cfg.hidden2, 1, seed + 7), 0.1));
  p.add("bo", Matrix(1, 1, -1.0));
  p.add("wg", ad::xavier_uniform(cfg.hidden2, cfg.dim, seed + 8));
  p.add("bg", Matrix(1, cfg.dim));
  return p;
}

DetectorOutput detect_grouped(const PointGroups& groups,
                              const ad::ParameterSet& params) {
  using namespace hcma::ad;
  const std::size_t m = groups.seeds.size();
  Matrix seed_pos(m, 3), seed_z(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (int k = 0; k < 3; ++k) seed_pos(i, k) = groups.seeds[i][k];
    seed_z(i, 0) = groups.seeds[i][2];
  }
  const Var x = constant(groups.inputs);
  const Var h1 = ad::tanh(add_row(ad::matmul(x, params.get("w1")), params.get("b1")));
  const Var with_z[3] = {segment_mean(h1, groups.offsets),
                         segment_max(h1, groups.offsets), constant(seed_z)};
  const Var g = ad::tanh(
      add_row(ad::matmul(concat_cols(with_z), params.get("w2")), params.get("b2")));
  auto head = [&](const char* w, const char* b) {
    return add_row(ad::matmul(g, params.get(w)), params.get(b));
  };
  DetectorOutput out;
  out.features = head("wf", "bf");
  out.centers = add(constant(seed_pos), head("wc", "bc"));
  out.log_sizes = head("ws", "bs");
  out.headings = head("wh", "bh");
  out.objectness_logits = head("wo", "bo");
  out.global = add_row(ad::matmul(mean_rows(g), params.get("wg")), params.get("bg"));
  return out;
}

DetectorOutput detect_points(const PointSet& points,
                             const ad::ParameterSet& params,
                             const DetectorConfig& cfg, std::uint64_t seed) {
  return detect_grouped(group_points(points, cfg, seed), params);
}

std::vector<Box3D> DetectorOutput::boxes() const {
  std::vector<Box3D> out;
  const Matrix& c = centers.value();
  const Matrix& s = log_sizes.value();
  const Matrix& h = headings.value();
  for (std::size_t i = 0; i < c.rows; ++i) {
    out.push_back(Box3D::make({c(i, 0), c(i, 1), c(i, 2)},
                              {std::exp(s(i, 0)), std::exp(s(i, 1)), std::exp(s(i, 2))},
                              h(i, 0)));
  }
  return out;
}

std::vector<double> DetectorOutput::objectness() const {
  std::vector<double> out;
  for (double z : objectness_logits.value().data) out.push_back(1.0 / (1.0 + std::exp(-z)));
  return out;
}

}  // namespace hcma::encoders
