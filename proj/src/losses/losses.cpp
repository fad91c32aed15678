#include "hcma/losses.hpp"

#include <cmath>
#include <limits>

#include "hcma/error.hpp"

namespace hcma::losses {

ad::Var contrastive_loss(const icma::ContrastBatch& batch) {
  batch.validate();
  if (batch.empty()) return ad::constant(Matrix(1, 1));
  const ad::Var logits =
      ad::scale(ad::matmul_nt(batch.anchors, batch.candidates), 1.0 / batch.tau);
  return ad::masked_info_nce(logits, batch.positive_mask(), batch.allowed_mask());
}

ad::Var cross_modal_loss(const icma::ContrastBatch& point_text,
                         const icma::ContrastBatch& point_image) {
  return ad::add(contrastive_loss(point_text), contrastive_loss(point_image));
}

ad::Var cross_modal_loss(const icma::BatchPair& pair) {
  return cross_modal_loss(pair.point_text, pair.point_image);
}

const char* term_name(Term t) {
  switch (t) {
    case Term::kObject: return "o";
    case Term::kView: return "v";
    case Term::kScene: return "s";
    case Term::kLocal: return "l";
    case Term::kGlobal: return "g";
    case Term::kAll: return "a";
  }
  return "?";
}

bool flagged(const icma::AlignmentIndicator& ind, Term t) {
  switch (t) {
    case Term::kObject: return ind.o;
    case Term::kView: return ind.v;
    case Term::kScene: return ind.s;
    case Term::kLocal: return ind.l;
    case Term::kGlobal: return ind.g;
    case Term::kAll: return ind.a;
  }
  return false;
}

ad::Var alignment_loss(const std::map<Term, ad::Var>& terms,
                       const icma::AlignmentIndicator& indicator) {
  indicator.validate();
  ad::Var total;
  for (Term t : kAllTerms) {
    if (!flagged(indicator, t)) continue;
    const auto it = terms.find(t);
    if (it == terms.end() || !it->second) {
      throw ConfigError(std::string("alignment term '") + term_name(t) +
                        "' is flagged but missing");
    }
    total = total ? ad::add(total, it->second) : it->second;
  }
  return total;
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_match(
    std::span<const Vec3> predicted, std::span<const Vec3> targets) {
  struct Cand {
    double d2;
    std::size_t p, t;
  };
  std::vector<Cand> all;
  all.reserve(predicted.size() * targets.size());
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double d = predicted[p][k] - targets[t][k];
        d2 += d * d;
      }
      all.push_back({d2, p, t});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Cand& a, const Cand& b) { return a.d2 < b.d2; });
  std::vector<char> used_p(predicted.size()), used_t(targets.size());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : all) {
    if (used_p[c.p] || used_t[c.t]) continue;
    used_p[c.p] = used_t[c.t] = 1;
    out.emplace_back(c.p, c.t);
  }
  return out;
}

LocalizationTerms localization_loss(const ad::Var& centers,
                                    const ad::Var& log_sizes,
                                    const ad::Var& headings,
                                    const ad::Var& objectness_logits,
                                    std::span<const Box3D> targets,
                                    const LocalizationWeights& w) {
  const std::size_t m = centers.rows();
  std::vector<Vec3> pc(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (int k = 0; k < 3; ++k) pc[i][k] = centers.value()(i, k);
  }
  std::vector<Vec3> tc;
  for (const auto& t : targets) tc.push_back(t.center);

  LocalizationTerms out;
  out.matches = greedy_match(pc, tc);
  const ad::Var zero = ad::constant(Matrix(1, 1));
  out.center = out.size = out.heading = out.objectness = zero;

  if (!out.matches.empty()) {
    const std::size_t n = out.matches.size();
    std::vector<std::size_t> rows;
    Matrix tcen(n, 3), tsize(n, 3), thead(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [p, t] = out.matches[i];
      rows.push_back(p);
      for (int k = 0; k < 3; ++k) {
        tcen(i, k) = targets[t].center[k];
        tsize(i, k) = targets[t].size[k];
      }
      thead(i, 0) = targets[t].heading;
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.center = ad::scale(
        ad::sum(ad::abs(ad::sub(ad::gather_rows(centers, rows), ad::constant(tcen)))), inv);
    out.size = ad::scale(
        ad::sum(ad::abs(ad::sub(ad::exp(ad::gather_rows(log_sizes, rows)),
                                ad::constant(tsize)))),
        inv);
    out.heading = ad::scale(
        ad::sum(ad::periodic_abs(ad::sub(ad::gather_rows(headings, rows),
                                         ad::constant(thead)))),
        inv);
  }
  if (objectness_logits) {
    Matrix target(m, 1);
    for (const auto& [p, t] : out.matches) target(p, 0) = 1.0;
    out.objectness = ad::bce_with_logits(objectness_logits, target);
  }
  out.total = ad::add(
      ad::add(ad::scale(out.center, w.center), ad::scale(out.size, w.size)),
      ad::add(ad::scale(out.heading, w.heading), ad::scale(out.objectness, w.objectness)));
  return out;
}

double localization_loss(std::span<const Box3D> predicted,
                         std::span<const Box3D> targets,
                         const LocalizationWeights& w) {
  Matrix c(predicted.size(), 3), s(predicted.size(), 3), h(predicted.size(), 1);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      c(i, k) = predicted[i].center[k];
      s(i, k) = std::log(predicted[i].size[k]);
    }
    h(i, 0) = predicted[i].heading;
  }
  return localization_loss(ad::constant(c), ad::constant(s), ad::constant(h),
                           ad::Var(), targets, w)
      .total.item();
}

ad::Var total_loss(const ad::Var& align, const ad::Var& loc) {
  return ad::add(align, loc);
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  indicator.validate();
  const auto& l = localization;
  if (l.center < 0 || l.size < 0 || l.heading < 0 || l.objectness < 0) {
    throw ConfigError("localisation weights must be non-negative");
  }
}

std::string LossReport::first_non_finite() const {
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) return name;
  }
  if (!std::isfinite(align)) return "L_align";
  if (!std::isfinite(loc)) return "L_loc";
  if (!std::isfinite(total)) return "L";
  return {};
}

}  // namespace hcma::losses
