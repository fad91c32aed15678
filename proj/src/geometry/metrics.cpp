#include <algorithm>
#include <numeric>

#include "hcma/error.hpp"
#include "hcma/geometry.hpp"

namespace hcma::geometry {

std::optional<double> ap_at_iou(std::span<const EvalFrame> frames, int cls,
                                double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("ap_at_iou: threshold must lie in (0, 1)");
  }
  struct Ranked {
    double confidence;
    std::size_t frame;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  std::size_t n_gt = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t i = 0; i < frames[f].predictions.size(); ++i) {
      const auto& p = frames[f].predictions[i];
      if (p.class_index == cls) ranked.push_back({p.confidence, f, i});
    }
    for (const auto& g : frames[f].ground_truth) n_gt += g.class_index == cls;
  }
  if (n_gt == 0) {
    if (ranked.empty()) return std::nullopt;
    return 0.0;
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) {
                     return a.confidence > b.confidence;
                   });

  std::vector<std::vector<char>> matched(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    matched[f].assign(frames[f].ground_truth.size(), 0);
  }
  std::vector<double> tp(ranked.size()), fp(ranked.size());
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& frame = frames[ranked[k].frame];
    const Box3D& box = frame.predictions[ranked[k].index].box;
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < frame.ground_truth.size(); ++g) {
      if (frame.ground_truth[g].class_index != cls) continue;
      const double iou = iou3d(box, frame.ground_truth[g].box);
      if (iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best >= threshold && !matched[ranked[k].frame][best_gt]) {
      matched[ranked[k].frame][best_gt] = 1;
      tp[k] = 1.0;
    } else {
      fp[k] = 1.0;
    }
  }
  std::partial_sum(tp.begin(), tp.end(), tp.begin());
  std::partial_sum(fp.begin(), fp.end(), fp.begin());

  std::vector<double> mrec{0.0}, mpre{0.0};
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    mrec.push_back(tp[k] / static_cast<double>(n_gt));
    mpre.push_back(tp[k] / (tp[k] + fp[k]));
  }
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) {
    mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  }
  double ap = 0.0;
  for (std::size_t i = 0; i + 1 < mrec.size(); ++i) {
    if (mrec[i + 1] != mrec[i]) ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
  }
  return ap;
}

std::optional<double> ap_at_iou(std::span<const DetectionResult> preds,
                                std::span<const GroundTruth> gts, int cls,
                                double threshold) {
  const EvalFrame frame{{preds.begin(), preds.end()}, {gts.begin(), gts.end()}};
  return ap_at_iou(std::span<const EvalFrame>(&frame, 1), cls, threshold);
}

double mean_ap(std::span<const EvalFrame> frames, std::span<const int> classes,
               double threshold) {
  double total = 0.0;
  std::size_t present = 0;
  for (int cls : classes) {
    bool has_gt = false;
    for (const auto& f : frames) {
      for (const auto& g : f.ground_truth) has_gt = has_gt || g.class_index == cls;
    }
    if (!has_gt) continue;
    total += ap_at_iou(frames, cls, threshold).value_or(0.0);
    ++present;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

double mean_ap(std::span<const DetectionResult> preds,
               std::span<const GroundTruth> gts, std::span<const int> classes,
               double threshold) {
  const EvalFrame frame{{preds.begin(), preds.end()}, {gts.begin(), gts.end()}};
  return mean_ap(std::span<const EvalFrame>(&frame, 1), classes, threshold);
}

}  // namespace hcma::geometry
