#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcma/encoders.hpp"
#include "hcma/hdi.hpp"
#include "hcma/icma.hpp"
#include "hcma/losses.hpp"
#include "hcma/ofca.hpp"
#include "hcma/parameters.hpp"
#include "hcma/scenegen.hpp"

namespace hcma::trainer {

using encoders::Embedding;
using scenegen::Scene;

struct ModelConfig {
  encoders::FrozenConfig frozen;
  encoders::DetectorConfig detector;
  ofca::OFCAConfig ofca;
  std::uint64_t seed = 0;  // trainable initialisation
};

// Frozen encoders plus the two trainable parts. `trainable` shares its
// leaves with encoders.detector ("det.") and ofca.weights ("ofca.").
struct Model {
  ModelConfig config;
  std::vector<std::string> vocabulary;
  std::vector<std::string> seen;
  encoders::EncoderBundle encoders;
  ofca::OFCAParams ofca;
  ad::ParameterSet trainable;

  Model(const ModelConfig& cfg, std::vector<std::string> vocabulary,
        std::vector<std::string> seen);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  std::vector<int> seen_indices() const;
  // Raw text embeddings of every vocabulary token plus the background token
  // (last row).
  Matrix prompt_bank() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 1;
  std::size_t batch_size = 4;  // scenes per step
  std::uint64_t seed = 0;
  losses::LossConfig loss;
  hdi::PseudoLabelConfig pseudo;
  // Evaluate on the held-out split every this many epochs; 0 disables.
  std::size_t eval_every = 0;

  void validate() const;
};

// Everything about a scene that does not depend on trainable parameters.
struct ViewCache {
  const geometry::CameraView* camera = nullptr;
  std::shared_ptr<const geometry::Raster> image;
  std::shared_ptr<const geometry::PointSet> points;
  encoders::PointGroups groups;
  std::vector<hdi::PseudoLabel> pseudo;
  std::vector<geometry::Box3D> pseudo_boxes;
  hdi::HierTuple tuple;  // view level
  Embedding image_feat;
  Embedding text_feat;
};

struct SceneCache {
  const Scene* scene = nullptr;
  std::vector<ViewCache> views;
  encoders::PointGroups groups;
  hdi::HierTuple tuple;  // scene level
  Embedding image_feat;
  Embedding text_feat;
};

SceneCache build_scene_cache(const Scene& scene, const Model& model,
                             const TrainConfig& cfg);
std::vector<SceneCache> build_caches(std::span<const Scene> scenes,
                                     const Model& model, const TrainConfig& cfg);

struct Forward {
  ad::Var total;
  losses::LossReport report;
};

// detect -> HDI -> ICMA -> OFCA -> losses over a batch of scenes.
Forward forward(const Model& model, std::span<const SceneCache* const> batch,
                const TrainConfig& cfg);

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One decoupled-weight-decay Adam update from the gradients currently held
// by the parameters.
void adamw_step(ad::ParameterSet& params, AdamWState& state, double lr,
                const TrainConfig& cfg);
// base * (1 + cos(pi * step / total)) / 2.
double cosine_lr(double base, std::size_t step, std::size_t total);

// Forward, backward and one optimizer step. Throws NumericError naming the
// offending term when the loss is not finite; parameters are left untouched
// in that case.
losses::LossReport train_step(Model& model, AdamWState& state,
                              std::span<const SceneCache* const> batch,
                              const TrainConfig& cfg, double lr);

struct MetricRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double align = 0.0;
  double loc = 0.0;
  std::optional<double> eval_map25;  // held-out seen-class mAP25
};

struct Checkpoint {
  static constexpr int kVersion = 1;
  std::string config_hash;
  std::size_t epoch = 0;  // completed epochs
  std::size_t total_steps = 0;
  ModelConfig model;
  std::vector<std::string> vocabulary;
  std::vector<std::string> seen;
  std::map<std::string, Matrix> params;
  AdamWState optimizer;
  std::vector<MetricRow> history;
};

Checkpoint snapshot(const Model& model, const AdamWState& state,
                    std::size_t epoch, std::size_t total_steps,
                    std::string config_hash, std::vector<MetricRow> history);
// Copies checkpoint parameters into an existing model.
void restore(Model& model, const Checkpoint& ckpt);
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRow>& rows,
                       const std::string& config_hash);

struct FitOptions {
  std::string config_hash;
  std::optional<Checkpoint> resume;
  std::span<const Scene> eval_scenes;
  // When set, checkpoint.json and metrics.csv are written after every epoch.
  std::filesystem::path out_dir;
  // Stop after this many epochs of the schedule (resume tests); 0 = all.
  std::size_t stop_after = 0;
};

// Epochs over seeded shuffles of `train` with a cosine schedule over the
// whole run. Throws CompatibilityError when resuming from a checkpoint with a
// different config hash.
Checkpoint fit(Model& model, std::span<const Scene> train,
               const TrainConfig& cfg, const FitOptions& opts = {});

struct GradCheckOptions {
  std::size_t samples = 64;
  double h = 1e-5;
  double tolerance = 1e-3;
  std::uint64_t seed = 0;
  bool corrupt = false;  // flip the sign of the analytic gradient
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::vector<std::string> failures;  // "<param>[<index>]: analytic vs numeric"
  bool ok() const { return failures.empty(); }
};

// |a - n| / max(|a|, |n|, 1e-6) over a random subsample of coordinates.
double relative_error(double analytic, double numeric);
GradCheckReport gradient_check(ad::ParameterSet& params,
                               const std::function<ad::Var()>& loss,
                               const GradCheckOptions& opts = {});

}  // namespace hcma::trainer
