#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hcma/error.hpp"
#include "hcma/harness.hpp"
#include "hcma/simd.hpp"
#include "verify.hpp"

namespace {

namespace fs = std::filesystem;
using hcma::harness::RunConfig;

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kBadConfig = 2;
constexpr int kIncompatible = 3;
constexpr int kIo = 4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "hcma_out";
  std::optional<std::string> prompts;
  std::optional<std::string> thresholds;
  std::string data;
  std::string checkpoint;
  std::string scene;
  std::size_t index = 0;
  bool resume = false;
  bool gradients = false;
};

RunConfig load_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig::defaults() : RunConfig::from_file(o.config);
  cfg.apply_env();
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.prompts) cfg.set("eval.prompts", *o.prompts);
  if (o.thresholds) cfg.set("eval.thresholds", *o.thresholds);
  cfg.validate();
  return cfg;
}

fs::path data_dir(const Options& o) { return o.data.empty() ? fs::path(o.out) : fs::path(o.data); }

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? fs::path(o.out) / "checkpoint.json" : fs::path(o.checkpoint);
}

int run_gen(const Options& o) {
  const auto cfg = load_config(o);
  const auto m = hcma::harness::cmd_gen(cfg, o.out);
  std::printf("wrote %zu train + %zu eval scenes to %s (config %s, data %s)\n", m.train_scenes,
              m.eval_scenes, o.out.c_str(), m.config_hash.c_str(), m.data_hash.c_str());
  return kOk;
}

int run_train(const Options& o) {
  const auto cfg = load_config(o);
  std::optional<fs::path> resume;
  if (o.resume) resume = checkpoint_path(o);
  const auto r = hcma::harness::cmd_train(cfg, data_dir(o), o.out, resume);
  std::printf("trained %zu epochs, %zu steps; epoch loss %.4f -> %.4f (config %s)\n",
              r.checkpoint.epoch, r.checkpoint.history.size(), r.first_epoch_loss,
              r.last_epoch_loss, cfg.model_hash().c_str());
  return kOk;
}

int run_eval(const Options& o) {
  const auto cfg = load_config(o);
  const auto report = hcma::harness::cmd_eval(cfg, checkpoint_path(o), data_dir(o), o.out);
  std::cout << hcma::harness::eval_report_table(report, cfg.config_hash());
  return kOk;
}

int run_detect(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path scene = o.scene.empty() ? data_dir(o) / "eval.jsonl" : fs::path(o.scene);
  const auto r = hcma::harness::cmd_detect(cfg, checkpoint_path(o), scene, o.index, o.out);
  for (const auto& rej : r.rejected) std::fprintf(stderr, "warning: prompt %s\n", rej.c_str());
  std::printf("%zu detections written to %s\n", r.detections.size(),
              (fs::path(o.out) / "detections.json").c_str());
  return kOk;
}

int run_selftest(const Options& o) {
  std::printf("kernels: %s\n", std::string(hcma::simd::isa_name(hcma::simd::active().isa)).c_str());
  bool ok = true;
  auto report = [&](const hcma::verify::Suite& s) {
    std::cout << s.name << '\n';
    s.print(std::cout);
    ok = ok && s.pass();
  };
  report(hcma::verify::invariant_suite());
  report(hcma::verify::oracle_suite());
  if (o.gradients) report(hcma::verify::gradient_suite());
  std::printf("selftest %s\n", ok ? "passed" : "FAILED");
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical cross-modal alignment for open-vocabulary 3D detection"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "flat key = value configuration file");
    cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  auto eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--prompts", o.prompts, "comma-separated text prompts ('*' = vocabulary)");
    cmd->add_option("--thresholds", o.thresholds, "comma-separated IoU thresholds");
  };

  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  common(gen);

  auto* train = app.add_subcommand("train", "train detector and context module");
  common(train);
  train->add_option("--data", o.data, "dataset directory (default: --out)");
  train->add_option("--checkpoint", o.checkpoint, "checkpoint to resume from");
  train->add_flag("--resume", o.resume, "continue from the checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
  common(eval);
  eval_flags(eval);
  eval->add_option("--data", o.data, "dataset directory (default: --out)");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint (default: <out>/checkpoint.json)");

  auto* detect = app.add_subcommand("detect", "open-vocabulary detection on one scene");
  common(detect);
  eval_flags(detect);
  detect->add_option("--data", o.data, "dataset directory (default: --out)");
  detect->add_option("--checkpoint", o.checkpoint, "checkpoint (default: <out>/checkpoint.json)");
  detect->add_option("--scene", o.scene, "scene file (default: <data>/eval.jsonl)");
  detect->add_option("--index", o.index, "scene line within the file");

  auto* selftest = app.add_subcommand("selftest", "run the invariant and oracle suites");
  selftest->add_flag("--gradients", o.gradients, "also run the gradient checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadConfig;
  }

  try {
    if (*gen) return run_gen(o);
    if (*train) return run_train(o);
    if (*eval) return run_eval(o);
    if (*detect) return run_detect(o);
    if (*selftest) return run_selftest(o);
  } catch (const hcma::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kBadConfig;
  } catch (const hcma::InvalidIndicatorError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kBadConfig;
  } catch (const hcma::CompatibilityError& e) {
    std::fprintf(stderr, "incompatible input: %s\n", e.what());
    return kIncompatible;
  } catch (const hcma::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const hcma::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
