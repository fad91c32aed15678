#include "hcma/icma.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "hcma/error.hpp"
#include "hcma/simd.hpp"

namespace hcma::icma {
namespace {

ad::Var constant_rows(std::span<const Embedding> rows) {
  return ad::constant(encoders::stack(std::vector<Embedding>(rows.begin(), rows.end())));
}

std::vector<int> subset(std::span<const int> keys,
                        std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(keys[r]);
  return out;
}

// Builds one batch whose anchor b is paired with candidate b. With self
// excluded, anchors left without any positive are dropped.
ContrastBatch paired_batch(const ad::Var& anchors, const ad::Var& candidates,
                           std::vector<int> keys, const PairConfig& cfg) {
  ContrastBatch b;
  b.tau = cfg.tau;
  b.include_self = cfg.include_self;
  b.candidates = candidates;
  b.candidate_keys = keys;
  if (cfg.include_self) {
    b.anchors = anchors;
    b.anchor_keys = keys;
    for (std::size_t i = 0; i < keys.size(); ++i) b.self_index.push_back(static_cast<long>(i));
    return b;
  }
  std::map<int, std::size_t> histogram;
  for (int k : keys) ++histogram[k];
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (histogram[keys[i]] > 1) {
      kept.push_back(i);
      b.anchor_keys.push_back(keys[i]);
      b.self_index.push_back(static_cast<long>(i));
    }
  }
  if (!kept.empty()) b.anchors = ad::gather_rows(anchors, kept);
  return b;
}

}  // namespace

bool ContrastBatch::allowed(std::size_t b, std::size_t j) const {
  if (include_self) return true;
  return self_index.empty() || self_index[b] != static_cast<long>(j);
}

bool ContrastBatch::positive(std::size_t b, std::size_t j) const {
  return anchor_keys[b] == candidate_keys[j] && allowed(b, j);
}

std::vector<char> ContrastBatch::allowed_mask() const {
  std::vector<char> m(size() * candidate_keys.size());
  for (std::size_t b = 0; b < size(); ++b) {
    for (std::size_t j = 0; j < candidate_keys.size(); ++j) {
      m[b * candidate_keys.size() + j] = allowed(b, j);
    }
  }
  return m;
}

std::vector<char> ContrastBatch::positive_mask() const {
  std::vector<char> m(size() * candidate_keys.size());
  for (std::size_t b = 0; b < size(); ++b) {
    for (std::size_t j = 0; j < candidate_keys.size(); ++j) {
      m[b * candidate_keys.size() + j] = positive(b, j);
    }
  }
  return m;
}

std::size_t ContrastBatch::positive_count(std::size_t b) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < candidate_keys.size(); ++j) n += positive(b, j);
  return n;
}

void ContrastBatch::validate() const {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  if (empty()) return;
  if (!anchors || !candidates) throw ContractError("batch without features");
  if (anchors.rows() != anchor_keys.size() ||
      candidates.rows() != candidate_keys.size()) {
    throw ContractError("batch keys do not match feature rows");
  }
  if (anchors.cols() != candidates.cols()) {
    throw DimensionMismatchError("anchor and candidate dimensions differ");
  }
  if (!self_index.empty() && self_index.size() != size()) {
    throw ContractError("self_index must have one entry per anchor");
  }
  for (std::size_t b = 0; b < size(); ++b) {
    if (positive_count(b) == 0) {
      throw ContractError("anchor " + std::to_string(b) + " has no positive");
    }
  }
}

AlignmentIndicator AlignmentIndicator::parse(const std::string& text) {
  std::string t;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
  }
  if (t == "O") return object_only();
  if (t == "OV") return object_view();
  if (t == "OS") return object_scene();
  if (t == "OVS") return object_view_scene();
  AlignmentIndicator ind{false, false, false, false, false, false};
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const std::size_t end = std::min(t.find(',', pos), t.size());
    const std::string flag = t.substr(pos, end - pos);
    if (flag == "o") ind.o = true;
    else if (flag == "v") ind.v = true;
    else if (flag == "s") ind.s = true;
    else if (flag == "l") ind.l = true;
    else if (flag == "g") ind.g = true;
    else if (flag == "a") ind.a = true;
    else throw InvalidIndicatorError("unknown indicator flag '" + flag + "'");
    pos = end + 1;
  }
  ind.validate();
  return ind;
}

bool AlignmentIndicator::is_valid() const {
  return *this == object_only() || *this == object_view() ||
         *this == object_scene() || *this == object_view_scene();
}

void AlignmentIndicator::validate() const {
  if (!is_valid()) {
    throw InvalidIndicatorError("indicator {" + to_string() +
                                "} is not one of {o}, {v,l}, {s,g}, {v,s,a}");
  }
}

std::string AlignmentIndicator::to_string() const {
  std::string out;
  auto add = [&](bool f, const char* name) {
    if (!f) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(o, "o");
  add(v, "v");
  add(s, "s");
  add(l, "l");
  add(g, "g");
  add(a, "a");
  return out;
}

int classify_by_text(const Embedding& f, std::span<const Embedding> bank) {
  if (bank.empty()) throw ContractError("classify_by_text: empty text bank");
  int best = 0;
  double best_score = 0.0;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    const double s = encoders::dot(f, bank[k]);
    if (k == 0 || s > best_score) {
      best = static_cast<int>(k);
      best_score = s;
    }
  }
  return best;
}

std::vector<int> classify_rows(const Matrix& features, const Matrix& bank) {
  if (bank.rows == 0) throw ContractError("classify_rows: empty text bank");
  if (features.cols != bank.cols) {
    throw DimensionMismatchError("feature and text bank dimensions differ");
  }
  const Matrix scores = matmul_nt(features, bank);
  std::vector<int> out(features.rows);
  for (std::size_t r = 0; r < features.rows; ++r) {
    const auto row = scores.row_span(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Matrix text_probabilities(const Matrix& features, const Matrix& bank,
                          double tau) {
  if (features.cols != bank.cols) {
    throw DimensionMismatchError("feature and text bank dimensions differ");
  }
  Matrix p = matmul_nt(features, bank);
  for (std::size_t r = 0; r < p.rows; ++r) {
    auto row = p.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp((v - mx) / tau);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return p;
}

std::vector<std::size_t> LevelFeatures::captioned() const {
  if (!text_rows.empty()) return text_rows;
  if (texts && texts.rows() != count()) return {};
  std::vector<std::size_t> all(count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

BatchPair make_pairs(const LevelFeatures& feats, std::span<const int> keys,
                     const PairConfig& cfg) {
  if (keys.size() != feats.count()) {
    throw ContractError("one key per tuple required");
  }
  BatchPair out;
  out.point_text.tau = out.point_image.tau = cfg.tau;
  out.point_text.include_self = out.point_image.include_self = cfg.include_self;
  if (feats.count() == 0) return out;
  if (feats.images.rows() != feats.count()) {
    throw ContractError("image features must have one row per tuple");
  }
  out.point_image = paired_batch(feats.points, feats.images,
                                 std::vector<int>(keys.begin(), keys.end()), cfg);
  const auto rows = feats.captioned();
  if (!rows.empty() && feats.texts) {
    if (feats.texts.rows() != rows.size()) {
      throw ContractError("text features must have one row per caption");
    }
    out.point_text = paired_batch(ad::gather_rows(feats.points, rows),
                                  feats.texts, subset(keys, rows), cfg);
  }
  return out;
}

BatchPair build_intra_object_pairs(const LevelFeatures& feats,
                                   const Matrix& raw_images,
                                   const Matrix& text_bank,
                                   const PairConfig& cfg) {
  if (feats.count() == 0) return make_pairs(feats, {}, cfg);
  const auto keys = classify_rows(raw_images, text_bank);
  return make_pairs(feats, keys, cfg);
}

BatchPair build_intra_object_pairs(std::span<const Embedding> points,
                                   std::span<const Embedding> images,
                                   std::span<const Embedding> texts,
                                   std::span<const Embedding> text_bank,
                                   const PairConfig& cfg) {
  if (points.size() != images.size() || points.size() != texts.size()) {
    throw ContractError("object feature lists differ in length");
  }
  if (points.empty()) return make_pairs(LevelFeatures{}, {}, cfg);
  LevelFeatures f{constant_rows(points), constant_rows(images),
                  constant_rows(texts), {}};
  return build_intra_object_pairs(
      f, f.images.value(),
      encoders::stack(std::vector<Embedding>(text_bank.begin(), text_bank.end())), cfg);
}

BatchPair build_intra_scene_pairs(const LevelFeatures& feats,
                                  std::span<const std::string> scene_labels,
                                  const PairConfig& cfg) {
  std::map<std::string, int> ids;
  std::vector<int> keys;
  for (const auto& label : scene_labels) {
    keys.push_back(ids.emplace(label, static_cast<int>(ids.size())).first->second);
  }
  return make_pairs(feats, keys, cfg);
}

BatchPair build_intra_scene_pairs(std::span<const Embedding> points,
                                  std::span<const Embedding> images,
                                  std::span<const Embedding> texts,
                                  std::span<const std::string> scene_labels,
                                  const PairConfig& cfg) {
  if (points.size() != images.size() || points.size() != texts.size() ||
      points.size() != scene_labels.size()) {
    throw ContractError("scene feature lists differ in length");
  }
  if (points.empty()) return make_pairs(LevelFeatures{}, {}, cfg);
  LevelFeatures f{constant_rows(points), constant_rows(images),
                  constant_rows(texts), {}};
  return build_intra_scene_pairs(f, scene_labels, cfg);
}

Embedding concat_levels(std::span<const Embedding> parts) {
  if (parts.empty()) throw ContractError("concat_levels: no parts");
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.dim() != parts[0].dim()) {
      throw DimensionMismatchError("concat_levels: part dimensions differ");
    }
    out.insert(out.end(), p.values.begin(), p.values.end());
  }
  return Embedding::unit(std::move(out));
}

ad::Var concat_levels(std::span<const ad::Var> parts) {
  if (parts.empty()) throw ContractError("concat_levels: no parts");
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols() || p.rows() != parts[0].rows()) {
      throw DimensionMismatchError("concat_levels: part shapes differ");
    }
  }
  return ad::normalize_rows(ad::concat_cols(parts));
}

BatchPair build_inter_pairs(InterKind kind, const InterInputs& in,
                            std::span<const int> object_keys,
                            const PairConfig& cfg) {
  const bool use_view = kind != InterKind::kGlobal;
  const bool use_scene = kind != InterKind::kLocal;
  if (!in.object) throw ConfigError("inter-level pairs need object features");
  if (use_view && (!in.view || in.view_of.size() != in.object->count())) {
    throw ConfigError("inter-level pairs of this kind need view features");
  }
  if (use_scene && (!in.scene || in.scene_of.size() != in.object->count())) {
    throw ConfigError("inter-level pairs of this kind need scene features");
  }
  const LevelFeatures& obj = *in.object;
  if (obj.count() == 0) return make_pairs(obj, {}, cfg);

  const auto text_rows = obj.captioned();
  auto pick = [](const std::vector<std::size_t>& index,
                 std::span<const std::size_t> rows) {
    std::vector<std::size_t> out;
    for (std::size_t r : rows) out.push_back(index[r]);
    return out;
  };
  std::vector<ad::Var> p{obj.points}, i{obj.images}, t;
  if (!text_rows.empty() && obj.texts) t.push_back(obj.texts);
  auto join = [&](const LevelFeatures& lvl, const std::vector<std::size_t>& of) {
    p.push_back(ad::gather_rows(lvl.points, of));
    i.push_back(ad::gather_rows(lvl.images, of));
    if (!t.empty()) t.push_back(ad::gather_rows(lvl.texts, pick(of, text_rows)));
  };
  if (use_view) join(*in.view, in.view_of);
  if (use_scene) join(*in.scene, in.scene_of);

  LevelFeatures joined;
  joined.points = concat_levels(p);
  joined.images = concat_levels(i);
  if (!t.empty()) {
    joined.texts = concat_levels(t);
    joined.text_rows = text_rows;
  }
  return make_pairs(joined, object_keys, cfg);
}

}  // namespace hcma::icma
