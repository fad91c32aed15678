#include <algorithm>
#include <numeric>
#include <random>

#include "hcma/error.hpp"
#include "hcma/evaluate.hpp"
#include "hcma/trainer.hpp"

namespace hcma::trainer {

Checkpoint fit(Model& model, std::span<const Scene> train,
               const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * cfg.epochs;

  AdamWState state;
  std::vector<MetricRow> history;
  std::size_t start = 0;
  if (opts.resume) {
    const Checkpoint& c = *opts.resume;
    if (c.config_hash != opts.config_hash) {
      throw CompatibilityError("checkpoint config hash " + c.config_hash +
                               " does not match " + opts.config_hash);
    }
    restore(model, c);
    state = c.optimizer;
    history = c.history;
    start = c.epoch;
  }
  if (cfg.epochs == 0 || train.empty() || start >= cfg.epochs) {
    return snapshot(model, state, start, total, opts.config_hash, std::move(history));
  }

  const auto caches = build_caches(train, model, cfg);
  const std::size_t end =
      opts.stop_after ? std::min(cfg.epochs, start + opts.stop_after) : cfg.epochs;
  for (std::size_t epoch = start; epoch < end; ++epoch) {
    std::vector<std::size_t> order(caches.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      std::vector<const SceneCache*> batch;
      for (std::size_t k = b * cfg.batch_size;
           k < std::min(order.size(), (b + 1) * cfg.batch_size); ++k) {
        batch.push_back(&caches[order[k]]);
      }
      const std::size_t step = epoch * per_epoch + b;
      const double lr = cosine_lr(cfg.lr, step, total);
      const auto report = train_step(model, state, batch, cfg, lr);
      history.push_back({epoch, step, lr, report.total, report.align, report.loc, {}});
    }
    if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 &&
        !opts.eval_scenes.empty()) {
      const EvalReport r = evaluate(model, opts.eval_scenes, EvalConfig{});
      history.back().eval_map25 = r.at(0.25)->map_seen;
    }
    if (!opts.out_dir.empty()) {
      std::filesystem::create_directories(opts.out_dir);
      const Checkpoint c = snapshot(model, state, epoch + 1, total, opts.config_hash, history);
      save_checkpoint(opts.out_dir / "checkpoint.json", c);
      write_metrics_csv(opts.out_dir / "metrics.csv", history, opts.config_hash);
    }
  }
  return snapshot(model, state, end, total, opts.config_hash, std::move(history));
}

}  // namespace hcma::trainer
