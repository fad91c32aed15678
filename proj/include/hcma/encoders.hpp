#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hcma/autograd.hpp"
#include "hcma/geometry.hpp"
#include "hcma/parameters.hpp"

// Stand-ins for the frozen vision-language encoders and the trainable point
// detector head that produce every 3D, image and text feature.

namespace hcma::encoders {

using geometry::Box2D;
using geometry::Box3D;
using geometry::PointSet;
using geometry::Raster;
using geometry::Vec3;

inline constexpr const char* kBackgroundToken = "<background>";

struct Embedding {
  std::vector<double> values;
  bool normalized = false;

  static Embedding unit(std::vector<double> values);
  std::size_t dim() const { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

double dot(const Embedding& a, const Embedding& b);
double cosine(const Embedding& a, const Embedding& b);
// Stack embeddings into an (n x d) matrix.
Matrix stack(const std::vector<Embedding>& rows);

// A caption is a set of class tokens.
using Caption = std::set<std::string>;

struct FrozenConfig {
  std::size_t dim = 32;
  std::uint64_t seed = 7;
  // Bound on the deterministic per-raster perturbation of image embeddings.
  double eps_align = 0.05;
  // A class is dominant in a crop when its pixel count reaches this
  // fraction of the most frequent class.
  double dominance = 0.3;
};

// Per-token anchor vectors shared by the text and image stand-ins. Class
// anchors are orthonormal; the background token is orthogonal too when the
// dimension allows, otherwise it is the negated normalised anchor sum.
class AnchorTable {
 public:
  AnchorTable(std::vector<std::string> vocabulary, const FrozenConfig& cfg);

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t dim() const { return dim_; }
  // -1 when unknown; background token maps to vocabulary().size().
  int index_of(const std::string& token) const;
  const std::vector<double>& anchor(int index) const { return anchors_.at(index); }
  const std::vector<double>& background() const { return anchors_.back(); }
  // Normalised mean of the given anchors.
  Embedding mean_anchor(const std::vector<int>& indices) const;

 private:
  std::vector<std::string> vocabulary_;
  std::size_t dim_;
  std::vector<std::vector<double>> anchors_;
};

class TextEncoder {
 public:
  explicit TextEncoder(std::shared_ptr<const AnchorTable> anchors)
      : anchors_(std::move(anchors)) {}

  Embedding encode(const std::string& token) const;
  // Empty captions encode to the background token.
  Embedding encode(const Caption& caption) const;
  std::size_t dim() const { return anchors_->dim(); }
  const AnchorTable& anchors() const { return *anchors_; }

 private:
  std::shared_ptr<const AnchorTable> anchors_;
};

class ImageEncoder {
 public:
  ImageEncoder(std::shared_ptr<const AnchorTable> anchors, FrozenConfig cfg)
      : anchors_(std::move(anchors)), cfg_(cfg) {}

  // Decodes the dominant class colours in the (cropped) raster and returns
  // their normalised mean anchor plus a raster-hash perturbation of norm
  // eps_align, re-normalised.
  Embedding encode(const Raster& raster,
                   const std::optional<Box2D>& crop = std::nullopt) const;
  std::vector<int> dominant_classes(const Raster& raster,
                                    const std::optional<Box2D>& crop) const;
  const FrozenConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<const AnchorTable> anchors_;
  FrozenConfig cfg_;
};

struct DetectorConfig {
  std::size_t queries = 16;  // 128 in the full-scale setting
  std::size_t neighbors = 32;
  double radius = 0.8;
  std::size_t hidden1 = 32;
  std::size_t hidden2 = 64;
  std::size_t dim = 32;
  double init_size = 0.8;
};

// Seeds and ball-query neighbourhoods of a point set. Pure function of the
// points, the config and the FPS start seed, so callers may cache it.
struct PointGroups {
  std::vector<Vec3> seeds;
  // Rows: [dx/r, dy/r, dz/r, z] per neighbour, grouped by seed.
  Matrix inputs;
  std::vector<std::size_t> offsets;  // seeds.size() + 1 entries
};

PointGroups group_points(const PointSet& points, const DetectorConfig& cfg,
                         std::uint64_t seed);
std::vector<std::size_t> farthest_point_sample(const PointSet& points,
                                               std::size_t count,
                                               std::size_t start);

ad::ParameterSet init_detector_params(const DetectorConfig& cfg,
                                      std::uint64_t seed);

struct DetectorOutput {
  ad::Var features;   // m x d, unnormalised
  ad::Var centers;    // m x 3
  ad::Var log_sizes;  // m x 3
  ad::Var headings;   // m x 1
  ad::Var objectness_logits;  // m x 1
  // Whole-input feature from the pooled backbone through its own head
  // (1 x d, unnormalised); the view- and scene-level point feature.
  ad::Var global;

  std::size_t queries() const { return features.rows(); }
  std::vector<Box3D> boxes() const;
  std::vector<double> objectness() const;
};

DetectorOutput detect_grouped(const PointGroups& groups,
                              const ad::ParameterSet& params);
DetectorOutput detect_points(const PointSet& points,
                             const ad::ParameterSet& params,
                             const DetectorConfig& cfg, std::uint64_t seed);

// Frozen text/image encoders plus the trainable detector parameters.
struct EncoderBundle {
  std::shared_ptr<const AnchorTable> anchors;
  TextEncoder text;
  ImageEncoder image;
  DetectorConfig detector_config;
  ad::ParameterSet detector;

  EncoderBundle(std::vector<std::string> vocabulary, const FrozenConfig& frozen,
                const DetectorConfig& det, std::uint64_t detector_seed);
  std::size_t dim() const { return anchors->dim(); }
};

}  // namespace hcma::encoders
