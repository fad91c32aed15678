#include <map>
#include <string>

#include "hcma/error.hpp"
#include "hcma/trainer.hpp"

namespace hcma::trainer {
namespace {

using ad::Var;

Matrix rows_of(const std::vector<Embedding>& e, std::size_t dim) {
  return e.empty() ? Matrix(0, dim) : encoders::stack(e);
}

// Context for a level feature: the raw object features of the same
// modality, or the level feature itself when the view has no objects.
Var context_or_self(const Matrix& objects, const Embedding& self) {
  return ad::constant(objects.rows > 0 ? objects : Matrix::row(self.values));
}

Var mean_of(const std::vector<Var>& scalars) {
  return ad::mean(ad::concat_rows(scalars));
}

struct ObjectRows {
  std::vector<Var> points, images, texts;
  std::vector<Embedding> raw_images;
  std::vector<std::size_t> text_rows;
  std::vector<std::size_t> view_of;
  std::vector<std::size_t> scene_of;
};

}  // namespace

Forward forward(const Model& model, std::span<const SceneCache* const> batch,
                const TrainConfig& cfg) {
  const auto& ind = cfg.loss.indicator;
  ind.validate();
  const std::size_t d = model.encoders.dim();
  const auto& det = model.encoders.detector;
  const auto& op = model.ofca;
  const icma::PairConfig pair_cfg{cfg.loss.tau, cfg.loss.include_self};
  const bool want_view = ind.needs_view();
  const bool want_scene = ind.needs_scene();

  ObjectRows obj;
  std::vector<Var> loc_terms;
  icma::LevelFeatures view_level, scene_level;
  std::vector<Var> vp, vi, vt, sp, si, st;
  std::vector<std::string> view_labels, scene_labels;
  std::map<std::string, double> terms;
  double center = 0, size = 0, heading = 0, objectness = 0;

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const SceneCache& sc = *batch[s];
    std::vector<Embedding> scene_raw_images, scene_raw_texts;
    for (const ViewCache& vc : sc.views) {
      const encoders::DetectorOutput out = encoders::detect_grouped(vc.groups, det);
      const Var feats = ad::normalize_rows(out.features);
      const auto loc = losses::localization_loss(out.centers, out.log_sizes,
                                                 out.headings, out.objectness_logits,
                                                 vc.pseudo_boxes, cfg.loss.localization);
      loc_terms.push_back(loc.total);
      center += loc.center.item();
      size += loc.size.item();
      heading += loc.heading.item();
      objectness += loc.objectness.item();

      // Object tuples: every predicted box, captioned when it was matched to
      // a pseudo label.
      const auto boxes = out.boxes();
      std::vector<hdi::ObjectSpec> specs(boxes.size());
      for (std::size_t q = 0; q < boxes.size(); ++q) specs[q].box = boxes[q];
      for (const auto& [q, t] : loc.matches) specs[q].class_index = vc.pseudo[t].class_index;
      const auto objects = hdi::build_object_level(*vc.camera, vc.image, *vc.points,
                                                   specs, model.vocabulary);

      std::vector<Embedding> raw_images, raw_texts;
      for (std::size_t k = 0; k < objects.tuples.size(); ++k) {
        const auto& t = objects.tuples[k];
        raw_images.push_back(model.encoders.image.encode(*t.image, t.crop));
        if (!t.caption.empty()) {
          obj.text_rows.push_back(obj.raw_images.size() + k);
          raw_texts.push_back(model.encoders.text.encode(t.caption));
        }
      }
      const Matrix img_m = rows_of(raw_images, d);
      const Matrix txt_m = rows_of(raw_texts, d);
      const std::size_t view_row = vp.size();
      if (!objects.tuples.empty()) {
        obj.points.push_back(ad::gather_rows(feats, objects.source));
        obj.images.push_back(
            ofca::ofca_forward_self(ad::constant(img_m), op, hdi::Level::kObject));
        if (txt_m.rows > 0) {
          obj.texts.push_back(
              ofca::ofca_forward_self(ad::constant(txt_m), op, hdi::Level::kObject));
        }
        for (std::size_t k = 0; k < objects.tuples.size(); ++k) {
          obj.view_of.push_back(view_row);
          obj.scene_of.push_back(s);
        }
        obj.raw_images.insert(obj.raw_images.end(), raw_images.begin(), raw_images.end());
      }
      if (want_view) {
        vp.push_back(ad::normalize_rows(out.global));
        vi.push_back(ofca::ofca_forward(ad::constant(Matrix::row(vc.image_feat.values)),
                                        context_or_self(img_m, vc.image_feat), op,
                                        hdi::Level::kView));
        vt.push_back(ofca::ofca_forward(ad::constant(Matrix::row(vc.text_feat.values)),
                                        context_or_self(txt_m, vc.text_feat), op,
                                        hdi::Level::kView));
        view_labels.push_back(vc.camera->scene_label);
      }
      scene_raw_images.insert(scene_raw_images.end(), raw_images.begin(), raw_images.end());
      scene_raw_texts.insert(scene_raw_texts.end(), raw_texts.begin(), raw_texts.end());
    }
    if (want_scene) {
      const encoders::DetectorOutput out = encoders::detect_grouped(sc.groups, det);
      sp.push_back(ad::normalize_rows(out.global));
      si.push_back(ofca::ofca_forward(
          ad::constant(Matrix::row(sc.image_feat.values)),
          context_or_self(rows_of(scene_raw_images, d), sc.image_feat), op,
          hdi::Level::kScene));
      st.push_back(ofca::ofca_forward(
          ad::constant(Matrix::row(sc.text_feat.values)),
          context_or_self(rows_of(scene_raw_texts, d), sc.text_feat), op,
          hdi::Level::kScene));
      scene_labels.push_back(sc.scene->label);
    }
  }

  icma::LevelFeatures object_level;
  std::vector<int> keys;
  if (!obj.points.empty()) {
    object_level.points = ad::concat_rows(obj.points);
    object_level.images = ad::concat_rows(obj.images);
    if (!obj.texts.empty()) {
      object_level.texts = ad::concat_rows(obj.texts);
      object_level.text_rows = obj.text_rows;
    }
    keys = icma::classify_rows(encoders::stack(obj.raw_images), model.prompt_bank());
  }
  if (want_view && !vp.empty()) {
    view_level = {ad::concat_rows(vp), ad::concat_rows(vi), ad::concat_rows(vt), {}};
  }
  if (want_scene && !sp.empty()) {
    scene_level = {ad::concat_rows(sp), ad::concat_rows(si), ad::concat_rows(st), {}};
  }

  std::map<losses::Term, Var> level_losses;
  auto record = [&](losses::Term t, const icma::BatchPair& pair) {
    const Var pt = losses::contrastive_loss(pair.point_text);
    const Var pi = losses::contrastive_loss(pair.point_image);
    const std::string name = losses::term_name(t);
    terms["L_c^" + name + ".pt"] = pt.item();
    terms["L_c^" + name + ".pi"] = pi.item();
    const Var lm = ad::add(pt, pi);
    terms["L_m^" + name] = lm.item();
    level_losses[t] = lm;
  };
  if (ind.o) record(losses::Term::kObject, icma::make_pairs(object_level, keys, pair_cfg));
  if (ind.v) {
    record(losses::Term::kView,
           icma::build_intra_scene_pairs(view_level, view_labels, pair_cfg));
  }
  if (ind.s) {
    record(losses::Term::kScene,
           icma::build_intra_scene_pairs(scene_level, scene_labels, pair_cfg));
  }
  if (ind.l || ind.g || ind.a) {
    icma::InterInputs in;
    in.object = &object_level;
    if (want_view) {
      in.view = &view_level;
      in.view_of = obj.view_of;
    }
    if (want_scene) {
      in.scene = &scene_level;
      in.scene_of = obj.scene_of;
    }
    if (ind.l) record(losses::Term::kLocal, icma::build_inter_pairs(icma::InterKind::kLocal, in, keys, pair_cfg));
    if (ind.g) record(losses::Term::kGlobal, icma::build_inter_pairs(icma::InterKind::kGlobal, in, keys, pair_cfg));
    if (ind.a) record(losses::Term::kAll, icma::build_inter_pairs(icma::InterKind::kAll, in, keys, pair_cfg));
  }

  Forward f;
  const Var align = losses::alignment_loss(level_losses, ind);
  const Var loc = loc_terms.empty() ? ad::constant(Matrix(1, 1)) : mean_of(loc_terms);
  f.total = losses::total_loss(align, loc);
  const double n = loc_terms.empty() ? 1.0 : static_cast<double>(loc_terms.size());
  terms["L_loc.center"] = center / n;
  terms["L_loc.size"] = size / n;
  terms["L_loc.heading"] = heading / n;
  terms["L_loc.objectness"] = objectness / n;
  f.report.terms = std::move(terms);
  f.report.align = align.item();
  f.report.loc = loc.item();
  f.report.total = f.total.item();
  return f;
}

}  // namespace hcma::trainer
