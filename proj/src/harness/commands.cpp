#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hcma/error.hpp"
#include "hcma/harness.hpp"

namespace hcma::harness {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// Dataset lines carry the producing hash as an extra key; the scene reader
// ignores keys it does not know.
void write_dataset(const fs::path& path, const std::vector<scenegen::Scene>& scenes,
                   const std::string& hash) {
  std::string text;
  for (const auto& s : scenes) {
    const std::string line = scenegen::scene_to_json(s);
    text += "{\"config_hash\":\"" + hash + "\"," + line.substr(1) + "\n";
  }
  write_text(path, text);
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::unique_ptr<trainer::Model> load_model(const RunConfig& cfg, const fs::path& path) {
  const trainer::Checkpoint ckpt = trainer::load_checkpoint(path);
  if (ckpt.config_hash != cfg.model_hash()) {
    throw CompatibilityError("checkpoint " + path.string() + " has config hash " +
                             ckpt.config_hash + ", this configuration has " +
                             cfg.model_hash());
  }
  return trainer::model_from_checkpoint(ckpt);
}

void check_data(const RunConfig& cfg, const fs::path& data_dir) {
  const DataManifest m = read_manifest(data_dir);
  if (m.data_hash != cfg.data_hash()) {
    throw CompatibilityError("dataset " + data_dir.string() + " has data hash " + m.data_hash +
                             ", this configuration has " + cfg.data_hash());
  }
}

double epoch_mean(const std::vector<trainer::MetricRow>& rows, std::size_t epoch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.epoch == epoch) {
      sum += r.loss;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

DataManifest cmd_gen(const RunConfig& cfg, const fs::path& out) {
  const scenegen::GenConfig g = cfg.gen();
  const std::size_t n_train = cfg.train_scenes();
  const std::size_t n_eval = cfg.eval_scenes();
  const auto train = scenegen::generate_dataset(g, n_train, 0);
  const auto eval = scenegen::generate_dataset(g, n_eval, n_train);

  DataManifest m{cfg.config_hash(), cfg.data_hash(), n_train, n_eval};
  write_dataset(out / "train.jsonl", train, m.config_hash);
  write_dataset(out / "eval.jsonl", eval, m.config_hash);
  const json j = {{"format", "hcma-dataset"},
                  {"config_hash", m.config_hash},
                  {"data_hash", m.data_hash},
                  {"train_scenes", n_train},
                  {"eval_scenes", n_eval},
                  {"classes", g.classes},
                  {"seen", g.seen},
                  {"unseen", g.unseen},
                  {"files", {"train.jsonl", "eval.jsonl"}}};
  write_text(out / "manifest.json", j.dump(2) + "\n");
  return m;
}

DataManifest read_manifest(const fs::path& data_dir) {
  const fs::path path = data_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    json j;
    in >> j;
    if (j.value("format", "") != "hcma-dataset") {
      throw ParseError(path.string() + " is not a dataset manifest");
    }
    return {j.at("config_hash"), j.at("data_hash"), j.at("train_scenes"), j.at("eval_scenes")};
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out,
                      const std::optional<fs::path>& resume) {
  cfg.validate();
  check_data(cfg, data_dir);
  const auto train = scenegen::load_dataset(data_dir / "train.jsonl");
  std::vector<scenegen::Scene> held_out;
  const auto tc = cfg.train();
  if (tc.eval_every > 0) held_out = scenegen::load_dataset(data_dir / "eval.jsonl");

  trainer::Model model(cfg.model(), cfg.vocabulary(), cfg.seen());
  trainer::FitOptions opts;
  opts.config_hash = cfg.model_hash();
  opts.eval_scenes = held_out;
  opts.out_dir = out;
  if (resume) opts.resume = trainer::load_checkpoint(*resume);

  TrainResult result;
  result.checkpoint = trainer::fit(model, train, tc, opts);
  const auto& h = result.checkpoint.history;
  if (!h.empty()) {
    result.first_epoch_loss = epoch_mean(h, h.front().epoch);
    result.last_epoch_loss = epoch_mean(h, h.back().epoch);
  }
  // fit() only writes per-epoch files; an empty schedule still leaves a
  // checkpoint behind.
  trainer::save_checkpoint(out / "checkpoint.json", result.checkpoint);
  trainer::write_metrics_csv(out / "metrics.csv", h, opts.config_hash);

  json epochs = json::array();
  if (!h.empty()) {
    for (std::size_t e = h.front().epoch; e <= h.back().epoch; ++e) {
      epochs.push_back({{"epoch", e}, {"loss", epoch_mean(h, e)}});
    }
  }
  const json report = {{"config_hash", cfg.config_hash()},
                       {"model_hash", cfg.model_hash()},
                       {"data_hash", cfg.data_hash()},
                       {"train_scenes", train.size()},
                       {"epochs_completed", result.checkpoint.epoch},
                       {"steps", h.size()},
                       {"indicator", tc.loss.indicator.to_string()},
                       {"first_epoch_loss", result.first_epoch_loss},
                       {"last_epoch_loss", result.last_epoch_loss},
                       {"epoch_loss", epochs}};
  write_text(out / "train_report.json", report.dump(2) + "\n");
  return result;
}

std::string eval_report_json(const trainer::EvalReport& r, const std::string& config_hash) {
  json results = json::array();
  for (const auto& t : r.results) {
    json per_class = json::object();
    for (const auto& [name, ap] : t.per_class) per_class[name] = optional_number(ap);
    results.push_back({{"threshold", t.threshold},
                       {"map_all", t.map_all},
                       {"map_seen", t.map_seen},
                       {"map_unseen", t.map_unseen},
                       {"random_baseline_seen", t.random_baseline_seen},
                       {"per_class", per_class}});
  }
  const json j = {{"config_hash", config_hash},
                  {"scenes", r.scenes},
                  {"frames", r.frames},
                  {"predictions", r.predictions},
                  {"ground_truth", r.ground_truth},
                  {"prompts", r.prompts},
                  {"rejected", r.rejected},
                  {"results", results}};
  return j.dump(2) + "\n";
}

std::string eval_report_table(const trainer::EvalReport& r, const std::string& config_hash) {
  std::ostringstream os;
  os << "# config_hash=" << config_hash << '\n';
  os << std::fixed << std::setprecision(4);
  std::size_t width = 12;
  for (const auto& t : r.results) {
    for (const auto& [name, ap] : t.per_class) width = std::max(width, name.size() + 2);
  }
  os << std::left << std::setw(static_cast<int>(width)) << "class";
  for (const auto& t : r.results) {
    os << std::right << std::setw(10) << ("AP@" + std::to_string(t.threshold).substr(0, 4));
  }
  os << '\n';
  auto row = [&](const std::string& label, auto value) {
    os << std::left << std::setw(static_cast<int>(width)) << label;
    for (const auto& t : r.results) {
      const std::optional<double> v = value(t);
      os << std::right << std::setw(10);
      if (v) os << *v; else os << "-";
    }
    os << '\n';
  };
  if (!r.results.empty()) {
    for (const auto& [name, ap] : r.results.front().per_class) {
      row(name, [&](const trainer::ThresholdReport& t) { return t.per_class.at(name); });
    }
  }
  using TR = trainer::ThresholdReport;
  row("mAP", [](const TR& t) { return std::optional<double>(t.map_all); });
  row("mAP seen", [](const TR& t) { return std::optional<double>(t.map_seen); });
  row("mAP unseen", [](const TR& t) { return std::optional<double>(t.map_unseen); });
  row("random seen", [](const TR& t) { return std::optional<double>(t.random_baseline_seen); });
  for (const auto& rej : r.rejected) os << "# rejected prompt " << rej << '\n';
  return os.str();
}

trainer::EvalReport cmd_eval(const RunConfig& cfg, const fs::path& checkpoint,
                             const fs::path& data_dir, const fs::path& out) {
  cfg.validate();
  check_data(cfg, data_dir);
  const auto model = load_model(cfg, checkpoint);
  const auto scenes = scenegen::load_dataset(data_dir / "eval.jsonl");
  const trainer::EvalConfig ec = cfg.eval();

  trainer::EvalReport report;
  if (ec.prompts.empty()) {
    report.scenes = scenes.size();
  } else {
    report = trainer::evaluate(*model, scenes, ec);
  }
  write_text(out / "metrics.json", eval_report_json(report, cfg.config_hash()));
  write_text(out / "metrics.txt", eval_report_table(report, cfg.config_hash()));
  return report;
}

std::string detections_json(const DetectResult& result, const std::vector<std::string>& prompts,
                            const std::string& config_hash) {
  json rejected = json::array();
  for (const auto& r : result.rejected) {
    const auto sep = r.find(": ");
    rejected.push_back({{"prompt", r.substr(0, sep)},
                        {"reason", sep == std::string::npos ? "" : r.substr(sep + 2)}});
  }
  json dets = json::array();
  for (const auto& d : result.detections) {
    dets.push_back({{"label", d.label},
                    {"class_index", d.class_index},
                    {"confidence", d.confidence},
                    {"objectness", d.objectness},
                    {"class_probability", d.class_probability},
                    {"box", {{"center", d.box.center},
                             {"size", d.box.size},
                             {"heading", d.box.heading}}}});
  }
  const json j = {{"config_hash", config_hash},
                  {"prompts", prompts},
                  {"rejected", rejected},
                  {"detections", dets}};
  return j.dump(2) + "\n";
}

DetectResult cmd_detect(const RunConfig& cfg, const fs::path& checkpoint,
                        const fs::path& scene_file, std::size_t index, const fs::path& out) {
  cfg.validate();
  const auto model = load_model(cfg, checkpoint);
  const auto scenes = scenegen::load_dataset(scene_file);
  if (index >= scenes.size()) {
    throw IoError(scene_file.string() + " has " + std::to_string(scenes.size()) +
                  " scenes, index " + std::to_string(index) + " requested");
  }
  const trainer::EvalConfig ec = cfg.eval();
  DetectResult result;
  std::vector<std::string> accepted;
  if (!ec.prompts.empty()) {
    const auto bank =
        trainer::build_prompt_bank(*model, ec.prompts, ec.inference.background_prompt);
    result.rejected = bank.rejected;
    accepted = bank.prompts;
    if (!accepted.empty()) {
      result.detections = trainer::detect(*model, scenes[index].points, bank, ec.inference);
    }
  }
  write_text(out / "detections.json", detections_json(result, accepted, cfg.config_hash()));
  return result;
}

}  // namespace hcma::harness
