#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "hcma/error.hpp"
#include "hcma/trainer.hpp"

namespace {

using namespace hcma::trainer;
using hcma::scenegen::GenConfig;
using hcma::scenegen::Scene;

GenConfig small_gen() {
  GenConfig g;
  g.clutter_points = 60;
  g.seed = 4242;
  return g;
}

struct Rig {
  GenConfig gen = small_gen();
  std::vector<Scene> scenes;
  ModelConfig mc;
  TrainConfig tc;

  explicit Rig(std::size_t n) {
    scenes = hcma::scenegen::generate_dataset(gen, n, 0);
    tc.lr = 5e-3;
  }
  std::unique_ptr<Model> model() const {
    return std::make_unique<Model>(mc, gen.classes, gen.seen);
  }
};

FitOptions with_hash(std::string hash) {
  FitOptions o;
  o.config_hash = std::move(hash);
  return o;
}

std::vector<const SceneCache*> all(const std::vector<SceneCache>& caches) {
  std::vector<const SceneCache*> out;
  for (const auto& c : caches) out.push_back(&c);
  return out;
}

TEST(TrainStep, ZeroLearningRateWithoutDecayKeepsParameters) {
  Rig rig(2);
  rig.tc.weight_decay = 0.0;
  auto m = rig.model();
  const auto caches = build_caches(rig.scenes, *m, rig.tc);
  const auto before = m->trainable.flat_values();
  AdamWState st;
  train_step(*m, st, all(caches), rig.tc, 0.0);
  EXPECT_EQ(m->trainable.flat_values(), before);
  EXPECT_EQ(st.step, 1u);
}

TEST(TrainStep, Deterministic) {
  Rig rig(2);
  auto a = rig.model();
  auto b = rig.model();
  const auto ca = build_caches(rig.scenes, *a, rig.tc);
  const auto cb = build_caches(rig.scenes, *b, rig.tc);
  AdamWState sa, sb;
  for (int i = 0; i < 3; ++i) {
    const auto ra = train_step(*a, sa, all(ca), rig.tc, rig.tc.lr);
    const auto rb = train_step(*b, sb, all(cb), rig.tc, rig.tc.lr);
    EXPECT_EQ(ra.total, rb.total);
  }
  EXPECT_EQ(a->trainable.flat_values(), b->trainable.flat_values());
}

TEST(TrainStep, NonFiniteLossLeavesParametersUntouched) {
  Rig rig(1);
  auto m = rig.model();
  const auto caches = build_caches(rig.scenes, *m, rig.tc);
  auto flat = m->trainable.flat_values();
  flat[0] = std::numeric_limits<double>::quiet_NaN();
  m->trainable.set_flat_values(flat);
  AdamWState st;
  EXPECT_THROW(train_step(*m, st, all(caches), rig.tc, rig.tc.lr), hcma::NumericError);
  const auto after = m->trainable.flat_values();
  EXPECT_TRUE(std::isnan(after[0]));
  EXPECT_TRUE(std::equal(after.begin() + 1, after.end(), flat.begin() + 1));
  EXPECT_EQ(st.step, 0u);
}

TEST(TrainStep, OverfitsOneScene) {
  Rig rig(1);
  rig.tc.weight_decay = 0.0;
  auto m = rig.model();
  const auto caches = build_caches(rig.scenes, *m, rig.tc);
  AdamWState st;
  const double first = train_step(*m, st, all(caches), rig.tc, rig.tc.lr).total;
  double last = first;
  for (int i = 1; i < 200; ++i) last = train_step(*m, st, all(caches), rig.tc, rig.tc.lr).total;
  EXPECT_LE(last, 0.5 * first) << first << " -> " << last;
}

TEST(Adamw, ZeroGradientIsPureDecay) {
  Rig rig(1);
  auto m = rig.model();
  m->trainable.zero_grad();
  const auto before = m->trainable.flat_values();
  AdamWState st;
  adamw_step(m->trainable, st, 0.1, rig.tc);
  const auto after = m->trainable.flat_values();
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_NEAR(after[i], before[i] * (1 - 0.1 * rig.tc.weight_decay), 1e-15);
  }
}

TEST(CosineLr, Schedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(1.0, 0, 10), 1.0);
  EXPECT_NEAR(cosine_lr(1.0, 5, 10), 0.5, 1e-15);
  EXPECT_NEAR(cosine_lr(1.0, 10, 10), 0.0, 1e-15);
  EXPECT_NEAR(cosine_lr(2.0, 3, 12), (1 + std::cos(std::numbers::pi / 4)), 1e-15);
}

TEST(TrainConfig, Validation) {
  TrainConfig tc;
  tc.lr = -1;
  EXPECT_THROW(tc.validate(), hcma::ConfigError);
  tc = {};
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), hcma::ConfigError);
}

TEST(Fit, ZeroEpochsReturnsInitialState) {
  Rig rig(2);
  rig.tc.epochs = 0;
  auto m = rig.model();
  const auto init = m->trainable.flat_values();
  const Checkpoint c = fit(*m, rig.scenes, rig.tc);
  EXPECT_EQ(c.epoch, 0u);
  EXPECT_TRUE(c.history.empty());
  EXPECT_EQ(m->trainable.flat_values(), init);
}

TEST(Fit, ResumeMatchesUninterruptedRun) {
  Rig rig(4);
  rig.tc.epochs = 3;
  rig.tc.batch_size = 2;
  auto straight = rig.model();
  const Checkpoint full = fit(*straight, rig.scenes, rig.tc, with_hash("h"));

  auto first = rig.model();
  FitOptions part = with_hash("h");
  part.stop_after = 1;
  const Checkpoint mid = fit(*first, rig.scenes, rig.tc, part);
  ASSERT_EQ(mid.epoch, 1u);

  // Resume into a fresh model through a save/load cycle.
  const auto path = std::filesystem::temp_directory_path() / "hcma_resume_ckpt.json";
  save_checkpoint(path, mid);
  auto second = model_from_checkpoint(load_checkpoint(path));
  FitOptions rest = with_hash("h");
  rest.resume = load_checkpoint(path);
  const Checkpoint done = fit(*second, rig.scenes, rig.tc, rest);
  std::filesystem::remove(path);

  EXPECT_EQ(done.epoch, 3u);
  EXPECT_EQ(second->trainable.flat_values(), straight->trainable.flat_values());
  ASSERT_EQ(done.history.size(), full.history.size());
  for (std::size_t i = 0; i < full.history.size(); ++i) {
    EXPECT_EQ(done.history[i].loss, full.history[i].loss) << "step " << i;
  }
}

TEST(Fit, ResumeRejectsOtherConfig) {
  Rig rig(2);
  rig.tc.epochs = 2;
  auto m = rig.model();
  FitOptions part = with_hash("a");
  part.stop_after = 1;
  const Checkpoint mid = fit(*m, rig.scenes, rig.tc, part);
  FitOptions rest = with_hash("b");
  rest.resume = mid;
  EXPECT_THROW(fit(*m, rig.scenes, rig.tc, rest), hcma::CompatibilityError);
}

TEST(Fit, FrozenEncodersUnchanged) {
  Rig rig(2);
  rig.tc.epochs = 1;
  auto m = rig.model();
  const auto& img = rig.scenes[0].views[0].image;
  const auto text = m->encoders.text.encode("chair");
  const auto image = m->encoders.image.encode(img);
  const auto bank = m->prompt_bank();
  fit(*m, rig.scenes, rig.tc);
  EXPECT_EQ(m->encoders.text.encode("chair"), text);
  EXPECT_EQ(m->encoders.image.encode(img), image);
  EXPECT_EQ(m->prompt_bank(), bank);
}

TEST(Checkpoint, RoundTrip) {
  Rig rig(2);
  rig.tc.epochs = 1;
  auto m = rig.model();
  const Checkpoint c = fit(*m, rig.scenes, rig.tc, with_hash("abc123"));
  const auto path = std::filesystem::temp_directory_path() / "hcma_roundtrip_ckpt.json";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.config_hash, c.config_hash);
  EXPECT_EQ(back.epoch, c.epoch);
  EXPECT_EQ(back.total_steps, c.total_steps);
  EXPECT_EQ(back.vocabulary, c.vocabulary);
  EXPECT_EQ(back.seen, c.seen);
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.optimizer.m, c.optimizer.m);
  EXPECT_EQ(back.optimizer.v, c.optimizer.v);
  EXPECT_EQ(back.optimizer.step, c.optimizer.step);
  ASSERT_EQ(back.history.size(), c.history.size());
  for (std::size_t i = 0; i < c.history.size(); ++i) EXPECT_EQ(back.history[i].loss, c.history[i].loss);
}

TEST(Checkpoint, MissingFile) {
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), hcma::IoError);
}

TEST(GradientCheck, FreshAndTrainedModels) {
  Rig rig(2);
  auto m = rig.model();
  const auto caches = build_caches(rig.scenes, *m, rig.tc);
  const auto batch = all(caches);
  GradCheckOptions opts;
  opts.tolerance = 1e-4;
  opts.samples = 32;
  auto loss = [&] { return forward(*m, batch, rig.tc).total; };
  const auto fresh = gradient_check(m->trainable, loss, opts);
  EXPECT_TRUE(fresh.ok()) << fresh.failures.front();
  AdamWState st;
  for (int i = 0; i < 50; ++i) train_step(*m, st, batch, rig.tc, rig.tc.lr);
  const auto trained = gradient_check(m->trainable, loss, opts);
  EXPECT_TRUE(trained.ok()) << trained.failures.front();
  opts.corrupt = true;
  EXPECT_FALSE(gradient_check(m->trainable, loss, opts).ok());
}

TEST(GradientCheck, RelativeError) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-8), 1e-2);
}

}  // namespace
