#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcma/geometry.hpp"
#include "hcma/trainer.hpp"

// Open-vocabulary inference from raw view points plus text prompts, and the
// per-class AP / mAP protocol over held-out scenes.

namespace hcma::trainer {

struct PromptBank {
  std::vector<std::string> prompts;  // accepted prompts, in input order
  std::vector<int> class_index;      // vocabulary index; background = -1
  Matrix text;                       // one adjusted text embedding per row
  std::vector<std::string> rejected; // "<prompt>: <reason>"
};

// Unknown prompts are reported in `rejected` and skipped. With
// `background`, the background token is appended as an extra prompt whose
// detections are discarded.
PromptBank build_prompt_bank(const Model& model,
                             const std::vector<std::string>& prompts,
                             bool background = true);

struct InferenceConfig {
  double tau = 0.1;
  double nms_iou = 0.25;  // per-class suppression; <= 0 disables
  std::uint64_t seed = 0; // FPS start
  bool background_prompt = true;
};

struct Detection {
  geometry::Box3D box;
  int class_index = 0;  // vocabulary index
  std::string label;
  double confidence = 0.0;  // objectness * class probability
  double objectness = 0.0;
  double class_probability = 0.0;
};

std::vector<Detection> detect(const Model& model, const geometry::PointSet& points,
                              const PromptBank& bank, const InferenceConfig& cfg);

struct EvalConfig {
  std::vector<std::string> prompts;  // empty = whole vocabulary
  std::vector<double> thresholds{0.25, 0.5};
  InferenceConfig inference;
  std::size_t baseline_shuffles = 5;
  std::uint64_t baseline_seed = 0;
  double min_visible_fraction = 0.5;
};

struct ThresholdReport {
  double threshold = 0.0;
  std::map<std::string, std::optional<double>> per_class;
  double map_all = 0.0;
  double map_seen = 0.0;
  double map_unseen = 0.0;
  // Seen-class mAP after shuffling predicted labels, averaged over shuffles.
  double random_baseline_seen = 0.0;
};

struct EvalReport {
  std::size_t scenes = 0;
  std::size_t frames = 0;
  std::size_t predictions = 0;
  std::size_t ground_truth = 0;
  std::vector<std::string> prompts;
  std::vector<std::string> rejected;
  std::vector<ThresholdReport> results;
  std::vector<geometry::EvalFrame> frames_data;

  const ThresholdReport* at(double threshold) const;
};

// One frame per view: predictions from detect() on the view points, ground
// truth = objects with at least min_visible_fraction of their points in the
// view.
EvalReport evaluate(const Model& model, std::span<const Scene> scenes,
                    const EvalConfig& cfg);

}  // namespace hcma::trainer
