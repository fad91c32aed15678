#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hcma/autograd.hpp"
#include "hcma/encoders.hpp"

// Text-bank classification of image features, positive/negative pair construction inside
// a hierarchy level and across levels (local/global/all concatenations).

namespace hcma::icma {

using encoders::Embedding;

// Anchors b = 0..B-1 against candidates j = 0..N-1. Candidate j is a
// positive for anchor b when their keys match. self_index[b] names the
// candidate paired with anchor b (or -1); include_self controls whether that
// pair takes part in the loss at all.
struct ContrastBatch {
  ad::Var anchors;     // B x D
  ad::Var candidates;  // N x D
  std::vector<int> anchor_keys;
  std::vector<int> candidate_keys;
  std::vector<long> self_index;
  double tau = 0.1;
  bool include_self = true;

  std::size_t size() const { return anchor_keys.size(); }
  bool empty() const { return anchor_keys.empty(); }
  bool allowed(std::size_t b, std::size_t j) const;
  bool positive(std::size_t b, std::size_t j) const;
  std::vector<char> allowed_mask() const;
  std::vector<char> positive_mask() const;
  std::size_t positive_count(std::size_t b) const;
  // Throws ContractError when tau <= 0, shapes disagree or an anchor has no
  // positive.
  void validate() const;
};

struct BatchPair {
  ContrastBatch point_text;
  ContrastBatch point_image;
};

struct PairConfig {
  double tau = 0.1;
  bool include_self = true;
};

// Which level terms enter the alignment loss. Only the four rows
// {o}, {v,l}, {s,g} and {v,s,a} are valid.
struct AlignmentIndicator {
  bool o = true, v = false, s = false, l = false, g = false, a = false;

  static AlignmentIndicator object_only() { return {}; }
  static AlignmentIndicator object_view() { return {false, true, false, true, false, false}; }
  static AlignmentIndicator object_scene() { return {false, false, true, false, true, false}; }
  static AlignmentIndicator object_view_scene() { return {false, true, true, false, false, true}; }

  // Accepts a comma list of flags ("v,l") or a row name ("O", "OV", "OS",
  // "OVS"). Throws InvalidIndicatorError.
  static AlignmentIndicator parse(const std::string& text);
  bool is_valid() const;
  void validate() const;
  std::string to_string() const;
  bool needs_view() const { return v || l || a; }
  bool needs_scene() const { return s || g || a; }
  bool operator==(const AlignmentIndicator&) const = default;
};

// argmax_k softmax(f . bank_k); the softmax is monotone so this is the
// argmax of the raw dot products. Ties resolve to the lowest index.
int classify_by_text(const Embedding& f, std::span<const Embedding> bank);
std::vector<int> classify_rows(const Matrix& features, const Matrix& bank);
// Row-wise softmax(features . bank^T / tau).
Matrix text_probabilities(const Matrix& features, const Matrix& bank,
                          double tau);

// Per-tuple features of one level. Row r of `points` and `images` belong to
// tuple r. Only tuples listed in text_rows carry a caption; `texts` holds one
// row per entry. An empty text_rows means every tuple is captioned.
struct LevelFeatures {
  ad::Var points;
  ad::Var images;
  ad::Var texts;
  std::vector<std::size_t> text_rows;

  std::size_t count() const { return points ? points.rows() : 0; }
  std::vector<std::size_t> captioned() const;
};

// Builds both batches of one level from per-tuple group keys.
BatchPair make_pairs(const LevelFeatures& feats, std::span<const int> keys,
                     const PairConfig& cfg);

// Group key = text-bank class of each tuple's raw image feature.
BatchPair build_intra_object_pairs(const LevelFeatures& feats,
                                   const Matrix& raw_images,
                                   const Matrix& text_bank,
                                   const PairConfig& cfg);
BatchPair build_intra_object_pairs(std::span<const Embedding> points,
                                   std::span<const Embedding> images,
                                   std::span<const Embedding> texts,
                                   std::span<const Embedding> text_bank,
                                   const PairConfig& cfg = {});

// Group key = scene label.
BatchPair build_intra_scene_pairs(const LevelFeatures& feats,
                                  std::span<const std::string> scene_labels,
                                  const PairConfig& cfg);
BatchPair build_intra_scene_pairs(std::span<const Embedding> points,
                                  std::span<const Embedding> images,
                                  std::span<const Embedding> texts,
                                  std::span<const std::string> scene_labels,
                                  const PairConfig& cfg = {});

Embedding concat_levels(std::span<const Embedding> parts);
ad::Var concat_levels(std::span<const ad::Var> parts);

enum class InterKind { kLocal, kGlobal, kAll };

// Object tuples joined with the features of the view and scene they came
// from. view_of[r] / scene_of[r] index rows of `view` / `scene`.
struct InterInputs {
  const LevelFeatures* object = nullptr;
  const LevelFeatures* view = nullptr;
  const LevelFeatures* scene = nullptr;
  std::vector<std::size_t> view_of;
  std::vector<std::size_t> scene_of;
};

// Concatenates within each modality (points with points, text with text,
// image with image) and groups by the objects' keys. Throws ConfigError when
// a level required by `kind` is missing.
BatchPair build_inter_pairs(InterKind kind, const InterInputs& in,
                            std::span<const int> object_keys,
                            const PairConfig& cfg);

}  // namespace hcma::icma
