#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcma/autograd.hpp"
#include "hcma/geometry.hpp"
#include "hcma/icma.hpp"

namespace hcma::losses {

using geometry::Box3D;
using geometry::Vec3;

// -(1/B) sum_b log(sum_{pos} exp(s_b.s_i/tau) / sum_{allowed} exp(s_b.s_j/tau)).
// An empty batch contributes a constant 0. Throws ContractError on an anchor
// without positives.
ad::Var contrastive_loss(const icma::ContrastBatch& batch);
// L_c(points, text) + L_c(points, image).
ad::Var cross_modal_loss(const icma::BatchPair& pair);
ad::Var cross_modal_loss(const icma::ContrastBatch& point_text,
                         const icma::ContrastBatch& point_image);

enum class Term { kObject, kView, kScene, kLocal, kGlobal, kAll };
const char* term_name(Term t);
bool flagged(const icma::AlignmentIndicator& ind, Term t);
inline constexpr Term kAllTerms[] = {Term::kObject, Term::kView,   Term::kScene,
                                     Term::kLocal,  Term::kGlobal, Term::kAll};

// Sum of the flagged level terms. Throws InvalidIndicatorError for an
// indicator outside the table and ConfigError when a flagged term is absent.
ad::Var alignment_loss(const std::map<Term, ad::Var>& terms,
                       const icma::AlignmentIndicator& indicator);

struct LocalizationWeights {
  double center = 1.0;
  double size = 1.0;
  double heading = 1.0;
  double objectness = 1.0;
};

// One-to-one matching: repeatedly takes the closest remaining
// (prediction, target) centre pair. Ties go to the lower prediction index,
// then the lower target index. Returns (prediction, target) pairs in the
// order they were taken.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(
    std::span<const Vec3> predicted, std::span<const Vec3> targets);

struct LocalizationTerms {
  ad::Var total;
  ad::Var center;
  ad::Var size;
  ad::Var heading;
  ad::Var objectness;
  std::vector<std::pair<std::size_t, std::size_t>> matches;
};

// Regression terms average over matched pairs: L1 centre, L1 size (on
// exp(log_size)) and wrapped-L1 heading. Objectness is binary cross entropy
// over all predictions with target 1 for matched ones; pass an empty Var to
// skip it. With no targets only the objectness term remains.
LocalizationTerms localization_loss(const ad::Var& centers,
                                    const ad::Var& log_sizes,
                                    const ad::Var& headings,
                                    const ad::Var& objectness_logits,
                                    std::span<const Box3D> targets,
                                    const LocalizationWeights& w = {});
// Box-list form without objectness.
double localization_loss(std::span<const Box3D> predicted,
                         std::span<const Box3D> targets,
                         const LocalizationWeights& w = {});

// L = L_align + L_loc.
ad::Var total_loss(const ad::Var& align, const ad::Var& loc);

struct LossConfig {
  double tau = 0.1;
  bool include_self = true;
  icma::AlignmentIndicator indicator = icma::AlignmentIndicator::object_view();
  LocalizationWeights localization;

  void validate() const;
};

struct LossReport {
  std::map<std::string, double> terms;  // L_m^<level>, L_c^<level>.<pt|pi>
  double align = 0.0;
  double loc = 0.0;
  double total = 0.0;

  // Name of the first non-finite entry, empty when all are finite.
  std::string first_non_finite() const;
};

}  // namespace hcma::losses
