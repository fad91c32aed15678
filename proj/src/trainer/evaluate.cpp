#include "hcma/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "hcma/error.hpp"

namespace hcma::trainer {

PromptBank build_prompt_bank(const Model& model,
                             const std::vector<std::string>& prompts,
                             bool background) {
  PromptBank bank;
  std::vector<Embedding> rows;
  std::set<std::string> seen;
  for (const auto& p : prompts) {
    if (!seen.insert(p).second) {
      bank.rejected.push_back(p + ": duplicate prompt");
      continue;
    }
    if (p == encoders::kBackgroundToken) {
      bank.rejected.push_back(p + ": reserved token");
      continue;
    }
    try {
      rows.push_back(model.encoders.text.encode(p));
    } catch (const UnknownVocabularyError& e) {
      bank.rejected.push_back(p + ": " + e.what());
      continue;
    }
    bank.prompts.push_back(p);
    bank.class_index.push_back(model.encoders.anchors->index_of(p));
  }
  if (rows.empty()) {
    bank.text = Matrix(0, model.encoders.dim());
    return bank;
  }
  if (background) {
    rows.push_back(model.encoders.text.encode(encoders::Caption{}));
    bank.class_index.push_back(-1);
  }
  const ad::Var raw = ad::constant(encoders::stack(rows));
  bank.text = ofca::ofca_forward_self(raw, model.ofca, hdi::Level::kObject).value();
  return bank;
}

std::vector<Detection> detect(const Model& model, const geometry::PointSet& points,
                              const PromptBank& bank, const InferenceConfig& cfg) {
  std::vector<Detection> out;
  if (bank.prompts.empty() || points.empty()) return out;
  const auto raw = encoders::detect_points(points, model.encoders.detector,
                                           model.config.detector, cfg.seed);
  const Matrix feats = ad::normalize_rows(raw.features).value();
  const Matrix probs = icma::text_probabilities(feats, bank.text, cfg.tau);
  const auto boxes = raw.boxes();
  const auto obj = raw.objectness();
  std::vector<Detection> all;
  for (std::size_t q = 0; q < boxes.size(); ++q) {
    const auto row = probs.row_span(q);
    const std::size_t k = std::max_element(row.begin(), row.end()) - row.begin();
    const int cls = bank.class_index[k];
    if (cls < 0) continue;
    all.push_back({boxes[q], cls, model.vocabulary[cls], obj[q] * row[k], obj[q], row[k]});
  }
  std::stable_sort(all.begin(), all.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });
  for (const auto& d : all) {
    bool keep = true;
    if (cfg.nms_iou > 0.0) {
      for (const auto& k : out) {
        if (k.class_index == d.class_index && geometry::iou3d(k.box, d.box) >= cfg.nms_iou) {
          keep = false;
          break;
        }
      }
    }
    if (keep) out.push_back(d);
  }
  return out;
}

const ThresholdReport* EvalReport::at(double threshold) const {
  for (const auto& r : results) {
    if (std::abs(r.threshold - threshold) < 1e-12) return &r;
  }
  return nullptr;
}

EvalReport evaluate(const Model& model, std::span<const Scene> scenes,
                    const EvalConfig& cfg) {
  EvalReport report;
  const auto prompts = cfg.prompts.empty() ? model.vocabulary : cfg.prompts;
  const PromptBank bank =
      build_prompt_bank(model, prompts, cfg.inference.background_prompt);
  report.prompts = bank.prompts;
  report.rejected = bank.rejected;
  report.scenes = scenes.size();

  for (const auto& scene : scenes) {
    for (const auto& view : scene.views) {
      geometry::EvalFrame frame;
      const auto pts = scenegen::view_points(scene, view);
      for (const auto& d : detect(model, pts, bank, cfg.inference)) {
        frame.predictions.push_back({d.box, d.class_index, d.confidence});
      }
      for (int o : scenegen::visible_objects(scene, view, cfg.min_visible_fraction)) {
        frame.ground_truth.push_back({scene.objects[o].box, scene.objects[o].class_index});
      }
      report.predictions += frame.predictions.size();
      report.ground_truth += frame.ground_truth.size();
      report.frames_data.push_back(std::move(frame));
    }
  }
  report.frames = report.frames_data.size();

  std::vector<int> all, seen_idx = model.seen_indices(), unseen_idx;
  for (int c = 0; c < static_cast<int>(model.vocabulary.size()); ++c) {
    all.push_back(c);
    if (!std::binary_search(seen_idx.begin(), seen_idx.end(), c)) unseen_idx.push_back(c);
  }
  const auto& frames = report.frames_data;
  for (double thr : cfg.thresholds) {
    ThresholdReport t;
    t.threshold = thr;
    for (int c : all) t.per_class[model.vocabulary[c]] = geometry::ap_at_iou(frames, c, thr);
    t.map_all = geometry::mean_ap(frames, all, thr);
    t.map_seen = geometry::mean_ap(frames, seen_idx, thr);
    t.map_unseen = geometry::mean_ap(frames, unseen_idx, thr);

    double baseline = 0.0;
    for (std::size_t s = 0; s < cfg.baseline_shuffles; ++s) {
      std::vector<int> labels;
      for (const auto& f : frames) {
        for (const auto& p : f.predictions) labels.push_back(p.class_index);
      }
      std::mt19937_64 rng(cfg.baseline_seed + s);
      std::shuffle(labels.begin(), labels.end(), rng);
      std::vector<geometry::EvalFrame> shuffled = frames;
      std::size_t k = 0;
      for (auto& f : shuffled) {
        for (auto& p : f.predictions) p.class_index = labels[k++];
      }
      baseline += geometry::mean_ap(shuffled, seen_idx, thr);
    }
    if (cfg.baseline_shuffles > 0) {
      t.random_baseline_seen = baseline / static_cast<double>(cfg.baseline_shuffles);
    }
    report.results.push_back(std::move(t));
  }
  return report;
}

}  // namespace hcma::trainer
