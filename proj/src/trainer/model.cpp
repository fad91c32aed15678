#include <algorithm>
#include <cstdint>

#include "hcma/error.hpp"
#include "hcma/trainer.hpp"

namespace hcma::trainer {
namespace {

std::uint64_t label_seed(const std::string& label, std::size_t view,
                         std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= view + 1;
  h *= 0x100000001b3ULL;
  return h;
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::vector<std::string> vocab,
             std::vector<std::string> seen_classes)
    : config(cfg),
      vocabulary(vocab),
      seen(std::move(seen_classes)),
      encoders(std::move(vocab), cfg.frozen, cfg.detector, cfg.seed),
      ofca(ofca::OFCAParams::init(cfg.ofca, cfg.seed + 1000)) {
  for (const auto& s : seen) {
    if (std::find(vocabulary.begin(), vocabulary.end(), s) == vocabulary.end()) {
      throw ConfigError("seen class '" + s + "' is not in the vocabulary");
    }
  }
  if (cfg.ofca.dim != cfg.frozen.dim) {
    throw ConfigError("OFCA and encoder dimensions differ");
  }
  trainable.merge("det.", encoders.detector);
  trainable.merge("ofca.", ofca.weights);
}

std::vector<int> Model::seen_indices() const {
  std::vector<int> out;
  for (const auto& s : seen) {
    out.push_back(static_cast<int>(
        std::find(vocabulary.begin(), vocabulary.end(), s) - vocabulary.begin()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Matrix Model::prompt_bank() const {
  std::vector<Embedding> rows;
  for (const auto& token : vocabulary) rows.push_back(encoders.text.encode(token));
  rows.push_back(encoders.text.encode(encoders::Caption{}));
  return encoders::stack(rows);
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam moment coefficients must lie in [0, 1)");
  }
  loss.validate();
}

SceneCache build_scene_cache(const Scene& scene, const Model& model,
                             const TrainConfig& cfg) {
  SceneCache sc;
  sc.scene = &scene;
  const auto seen = model.seen_indices();
  const auto& det = model.config.detector;
  std::vector<hdi::HierTuple> view_tuples;
  for (std::size_t vi = 0; vi < scene.views.size(); ++vi) {
    const auto& cam = scene.views[vi];
    ViewCache vc;
    vc.camera = &cam;
    vc.image = std::make_shared<const geometry::Raster>(cam.image);
    vc.points = std::make_shared<const geometry::PointSet>(scenegen::view_points(scene, cam));
    if (vc.points->empty()) continue;
    vc.groups = encoders::group_points(*vc.points, det, 0);
    hdi::PseudoLabelConfig pcfg = cfg.pseudo;
    pcfg.seed = label_seed(scene.label, vi, cfg.pseudo.seed);
    vc.pseudo = hdi::build_pseudo_labels(scene, cam, seen, pcfg);
    std::vector<hdi::ObjectSpec> specs;
    for (const auto& p : vc.pseudo) {
      vc.pseudo_boxes.push_back(p.box);
      specs.push_back({p.box, p.class_index});
    }
    const auto objects =
        hdi::build_object_level(cam, vc.image, *vc.points, specs, model.vocabulary);
    vc.tuple = hdi::build_view_level(objects.tuples, cam, vc.points, vc.image);
    vc.image_feat = model.encoders.image.encode(*vc.image);
    vc.text_feat = model.encoders.text.encode(vc.tuple.caption);
    view_tuples.push_back(vc.tuple);
    sc.views.push_back(std::move(vc));
  }
  sc.groups = encoders::group_points(scene.points, det, 0);
  sc.tuple = hdi::build_scene_level(view_tuples, scene);
  sc.image_feat = model.encoders.image.encode(*sc.tuple.image);
  sc.text_feat = model.encoders.text.encode(sc.tuple.caption);
  return sc;
}

std::vector<SceneCache> build_caches(std::span<const Scene> scenes,
                                     const Model& model, const TrainConfig& cfg) {
  std::vector<SceneCache> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(build_scene_cache(s, model, cfg));
  return out;
}

}  // namespace hcma::trainer
