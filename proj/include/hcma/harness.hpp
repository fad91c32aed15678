#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hcma/evaluate.hpp"
#include "hcma/scenegen.hpp"
#include "hcma/trainer.hpp"

// Run configuration and the gen / train / eval / detect commands behind the
// command-line tool.

namespace hcma::harness {

inline constexpr const char* kEnvPrefix = "HCMA_";

// Flat key=value configuration. Every key has a default; the file and the
// environment may only set known keys. Precedence: defaults < file <
// environment (HCMA_<KEY> with '.' -> '_', upper case) < explicit set().
class RunConfig {
 public:
  RunConfig();

  // Throws IoError when the file cannot be read, ConfigError on unknown keys
  // or malformed lines.
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig defaults() { return RunConfig(); }

  void set(const std::string& key, const std::string& value);
  // Applies every HCMA_* variable that names a known key.
  void apply_env();
  const std::string& get(const std::string& key) const;
  static const std::vector<std::string>& keys();
  static std::string env_name(const std::string& key);

  // Typed views. All of them validate and throw ConfigError.
  std::uint64_t seed() const;
  scenegen::GenConfig gen() const;
  std::size_t train_scenes() const;
  std::size_t eval_scenes() const;
  trainer::ModelConfig model() const;
  trainer::TrainConfig train() const;
  trainer::EvalConfig eval() const;
  // Prompts from eval.prompts; "*" is the whole vocabulary.
  std::vector<std::string> prompts() const;
  std::vector<std::string> vocabulary() const { return gen().classes; }
  std::vector<std::string> seen() const { return gen().seen; }

  // Parses every typed view once.
  void validate() const;

  // Sorted key=value lines.
  std::string canonical() const;
  // FNV-1a over canonical(): the whole run.
  std::string config_hash() const;
  // Everything that shapes the trained model (all but eval.*).
  std::string model_hash() const;
  // seed + gen.*: the generated dataset.
  std::string data_hash() const;

 private:
  std::map<std::string, std::string> values_;
  std::string hash_of(const std::vector<std::string>& prefixes) const;
};

std::string fnv1a_hex(const std::string& text);
std::vector<std::string> split_list(const std::string& text);

struct DataManifest {
  std::string config_hash;
  std::string data_hash;
  std::size_t train_scenes = 0;
  std::size_t eval_scenes = 0;
};

// Writes <out>/train.jsonl, <out>/eval.jsonl and <out>/manifest.json.
DataManifest cmd_gen(const RunConfig& cfg, const std::filesystem::path& out);
DataManifest read_manifest(const std::filesystem::path& data_dir);

struct TrainResult {
  trainer::Checkpoint checkpoint;
  double first_epoch_loss = 0.0;
  double last_epoch_loss = 0.0;
};

// Trains on <data>/train.jsonl and writes checkpoint.json, metrics.csv and
// train_report.json to `out`. With `resume`, continues from that checkpoint.
// Throws CompatibilityError when the dataset or checkpoint came from a
// different configuration.
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out,
                      const std::optional<std::filesystem::path>& resume = {});

// Evaluates the checkpoint on <data>/eval.jsonl and writes metrics.json and
// metrics.txt to `out`. An empty prompt list yields an empty report.
trainer::EvalReport cmd_eval(const RunConfig& cfg,
                             const std::filesystem::path& checkpoint,
                             const std::filesystem::path& data_dir,
                             const std::filesystem::path& out);

struct DetectResult {
  std::vector<trainer::Detection> detections;
  std::vector<std::string> rejected;
};

// Single-scene inference. `scene_file` is a dataset file; `index` selects the
// line. Unknown prompts are listed per prompt and skipped.
DetectResult cmd_detect(const RunConfig& cfg,
                        const std::filesystem::path& checkpoint,
                        const std::filesystem::path& scene_file,
                        std::size_t index, const std::filesystem::path& out);

// Deterministic JSON for a report (no timings); cmd_eval writes exactly this.
std::string eval_report_json(const trainer::EvalReport& report,
                             const std::string& config_hash);
std::string eval_report_table(const trainer::EvalReport& report,
                              const std::string& config_hash);
std::string detections_json(const DetectResult& result,
                            const std::vector<std::string>& prompts,
                            const std::string& config_hash);

}  // namespace hcma::harness
