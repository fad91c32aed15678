#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "hcma/encoders.hpp"
#include "hcma/error.hpp"
#include "hcma/scenegen.hpp"
#include "hcma/simd.hpp"

namespace hcma::encoders {
namespace {

void normalize_in_place(std::vector<double>& v) {
  const double n = l2_norm(v);
  if (!(n > 0.0)) throw NumericError("cannot normalise a zero vector");
  for (double& x : v) x /= n;
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xffU;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct PixelRange {
  int x0, x1, y0, y1;  // half-open
};

PixelRange crop_range(const Raster& raster, const std::optional<Box2D>& crop) {
  if (!crop) return {0, raster.width, 0, raster.height};
  if (!(crop->width() > 0.0) || !(crop->height() > 0.0)) {
    throw DegenerateCropError("crop has zero area");
  }
  PixelRange r{
      std::clamp(static_cast<int>(std::floor(crop->min[0])), 0, raster.width),
      std::clamp(static_cast<int>(std::ceil(crop->max[0])), 0, raster.width),
      std::clamp(static_cast<int>(std::floor(crop->min[1])), 0, raster.height),
      std::clamp(static_cast<int>(std::ceil(crop->max[1])), 0, raster.height)};
  if (r.x1 <= r.x0 || r.y1 <= r.y0) {
    throw DegenerateCropError("crop covers no raster pixels");
  }
  return r;
}

}  // namespace

Embedding Embedding::unit(std::vector<double> values) {
  normalize_in_place(values);
  return Embedding{std::move(values), true};
}

double dot(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw DimensionMismatchError("embedding dimensions differ");
  return simd::dot(a.values.data(), b.values.data(), a.dim());
}

double cosine(const Embedding& a, const Embedding& b) {
  return dot(a, b) / (l2_norm(a.values) * l2_norm(b.values));
}

Matrix stack(const std::vector<Embedding>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows[0].dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim() != m.cols) throw DimensionMismatchError("stack: ragged rows");
    std::copy(rows[i].values.begin(), rows[i].values.end(), m.row_span(i).begin());
  }
  return m;
}

AnchorTable::AnchorTable(std::vector<std::string> vocabulary,
                         const FrozenConfig& cfg)
    : vocabulary_(std::move(vocabulary)), dim_(cfg.dim) {
  const std::size_t v = vocabulary_.size();
  if (v == 0) throw ConfigError("anchor table needs a vocabulary");
  if (v > dim_) {
    throw ConfigError("vocabulary larger than the embedding dimension");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t orthogonal = std::min(v + 1, dim_);
  for (std::size_t i = 0; i < orthogonal; ++i) {
    std::vector<double> a(dim_);
    for (double& x : a) x = gauss(rng);
    // Two Gram-Schmidt passes keep the basis orthonormal to ~1e-16.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& prev : anchors_) {
        const double proj = simd::dot(a.data(), prev.data(), dim_);
        simd::axpy(-proj, prev.data(), a.data(), dim_);
      }
    }
    normalize_in_place(a);
    anchors_.push_back(std::move(a));
  }
  if (anchors_.size() == v) {
    std::vector<double> bg(dim_, 0.0);
    for (const auto& a : anchors_) simd::axpy(-1.0, a.data(), bg.data(), dim_);
    normalize_in_place(bg);
    anchors_.push_back(std::move(bg));
  }
}

int AnchorTable::index_of(const std::string& token) const {
  if (token == kBackgroundToken) return static_cast<int>(vocabulary_.size());
  const auto it = std::find(vocabulary_.begin(), vocabulary_.end(), token);
  return it == vocabulary_.end() ? -1 : static_cast<int>(it - vocabulary_.begin());
}

Embedding AnchorTable::mean_anchor(const std::vector<int>& indices) const {
  if (indices.empty()) throw ContractError("mean_anchor of no tokens");
  std::vector<double> acc(dim_, 0.0);
  for (int i : indices) simd::axpy(1.0, anchors_.at(i).data(), acc.data(), dim_);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double& x : acc) x *= inv;
  return Embedding::unit(std::move(acc));
}

Embedding TextEncoder::encode(const std::string& token) const {
  return encode(Caption{token});
}

Embedding TextEncoder::encode(const Caption& caption) const {
  if (caption.empty()) {
    return anchors_->mean_anchor({anchors_->index_of(kBackgroundToken)});
  }
  std::vector<int> idx;
  for (const auto& token : caption) {
    const int i = anchors_->index_of(token);
    if (i < 0) throw UnknownVocabularyError("unknown token '" + token + "'");
    idx.push_back(i);
  }
  return anchors_->mean_anchor(idx);
}

std::vector<int> ImageEncoder::dominant_classes(
    const Raster& raster, const std::optional<Box2D>& crop) const {
  if (raster.width <= 0 || raster.height <= 0 || raster.channels < 3) {
    throw DegenerateInputError("image encoder needs a non-empty RGB raster");
  }
  const PixelRange r = crop_range(raster, crop);
  std::map<int, std::size_t> counts;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      const int cls = scenegen::decode_class_color(
          raster.at(y, x, 0), raster.at(y, x, 1), raster.at(y, x, 2));
      if (cls >= 0 && cls < static_cast<int>(anchors_->vocabulary().size())) {
        ++counts[cls];
      }
    }
  }
  std::size_t best = 0;
  for (const auto& [cls, n] : counts) best = std::max(best, n);
  std::vector<int> out;
  for (const auto& [cls, n] : counts) {
    if (static_cast<double>(n) >= cfg_.dominance * static_cast<double>(best)) {
      out.push_back(cls);
    }
  }
  return out;
}

Embedding ImageEncoder::encode(const Raster& raster,
                               const std::optional<Box2D>& crop) const {
  std::vector<int> classes = dominant_classes(raster, crop);
  if (classes.empty()) {
    classes.push_back(anchors_->index_of(kBackgroundToken));
  }
  Embedding base = anchors_->mean_anchor(classes);
  if (cfg_.eps_align <= 0.0) return base;

  const PixelRange r = crop_range(raster, crop);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, static_cast<std::uint64_t>(r.x0) | (static_cast<std::uint64_t>(r.x1) << 16) |
                   (static_cast<std::uint64_t>(r.y0) << 32) |
                   (static_cast<std::uint64_t>(r.y1) << 48));
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      for (int c = 0; c < raster.channels; ++c) {
        const double v = raster.at(y, x, c);
        if (v != 0.0) {
          h = fnv1a(h, std::bit_cast<std::uint64_t>(v) ^
                           (static_cast<std::uint64_t>(y * raster.width + x) << 3));
        }
      }
    }
  }
  std::mt19937_64 rng(h ^ cfg_.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(base.dim());
  for (double& x : noise) x = gauss(rng);
  normalize_in_place(noise);
  simd::axpy(cfg_.eps_align, noise.data(), base.values.data(), base.dim());
  return Embedding::unit(std::move(base.values));
}

EncoderBundle::EncoderBundle(std::vector<std::string> vocabulary,
                             const FrozenConfig& frozen,
                             const DetectorConfig& det,
                             std::uint64_t detector_seed)
    : anchors(std::make_shared<const AnchorTable>(std::move(vocabulary), frozen)),
      text(anchors),
      image(anchors, frozen),
      detector_config(det),
      detector(init_detector_params(det, detector_seed)) {
  if (det.dim != frozen.dim) {
    throw ConfigError("detector and frozen encoders disagree on dimension");
  }
}

}  // namespace hcma::encoders
