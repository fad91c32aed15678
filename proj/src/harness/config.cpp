#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "hcma/error.hpp"
#include "hcma/harness.hpp"

namespace hcma::harness {
namespace {

// Key, default. The desk-scale defaults (lr, epochs) differ from the
// library's TrainConfig defaults, which keep the large-scale values.
const std::vector<std::pair<std::string, std::string>>& table() {
  static const std::vector<std::pair<std::string, std::string>> t{
      {"seed", "0"},
      {"gen.train_scenes", "48"},
      {"gen.eval_scenes", "16"},
      {"gen.classes", "chair,table,sofa,bed,cabinet,lamp,toilet,desk"},
      {"gen.seen", "chair,table,sofa,bed,cabinet,desk"},
      {"gen.unseen", "lamp,toilet"},
      {"gen.min_objects", "3"},
      {"gen.max_objects", "5"},
      {"gen.points_per_object", "240"},
      {"gen.clutter_points", "120"},
      {"gen.noise", "0.005"},
      {"gen.views", "3"},
      {"gen.image_width", "64"},
      {"gen.image_height", "48"},
      {"encoder.dim", "32"},
      {"encoder.seed", "7"},
      {"encoder.eps_align", "0.05"},
      {"model.queries", "16"},
      {"model.neighbors", "32"},
      {"model.radius", "0.8"},
      {"ofca.alpha", "0.5"},
      {"ofca.beta", "0.1"},
      {"ofca.blocks", "2"},
      {"ofca.heads", "4"},
      {"ofca.nie", "true"},
      {"train.lr", "0.005"},
      {"train.weight_decay", "0.1"},
      {"train.epochs", "60"},
      {"train.batch_size", "4"},
      {"train.tau", "0.1"},
      {"train.indicator", "v,l"},
      {"train.include_self", "true"},
      {"train.eval_every", "0"},
      {"eval.prompts", "*"},
      {"eval.thresholds", "0.25,0.5"},
      {"eval.tau", "0.1"},
      {"eval.nms_iou", "0.25"},
      {"eval.baseline_shuffles", "5"},
  };
  return t;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : table()) values_[k] = v;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, v] : table()) out.push_back(key);
    return out;
  }();
  return k;
}

std::string RunConfig::env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char c : key) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  RunConfig cfg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = trim(value);
}

void RunConfig::apply_env() {
  for (const auto& key : keys()) {
    if (const char* v = std::getenv(env_name(key).c_str())) set(key, v);
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::uint64_t RunConfig::seed() const { return as_uint("seed", get("seed")); }

std::size_t RunConfig::train_scenes() const {
  const auto n = as_uint("gen.train_scenes", get("gen.train_scenes"));
  if (n == 0) throw ConfigError("gen.train_scenes must be positive");
  return n;
}

std::size_t RunConfig::eval_scenes() const {
  return as_uint("gen.eval_scenes", get("gen.eval_scenes"));
}

scenegen::GenConfig RunConfig::gen() const {
  auto u = [&](const char* k) { return as_uint(k, get(k)); };
  scenegen::GenConfig g;
  g.classes = split_list(get("gen.classes"));
  g.seen = split_list(get("gen.seen"));
  g.unseen = split_list(get("gen.unseen"));
  g.min_objects = u("gen.min_objects");
  g.max_objects = u("gen.max_objects");
  g.points_per_object = u("gen.points_per_object");
  g.clutter_points = u("gen.clutter_points");
  g.noise = as_double("gen.noise", get("gen.noise"));
  g.views_per_scene = u("gen.views");
  g.image_width = static_cast<int>(u("gen.image_width"));
  g.image_height = static_cast<int>(u("gen.image_height"));
  // Scene i of a run uses seed*1000 + i; train and eval splits are disjoint
  // index ranges.
  g.seed = seed() * 1000;
  std::set<std::string> seen(g.seen.begin(), g.seen.end());
  for (const auto& c : g.unseen) {
    if (seen.count(c)) throw ConfigError("class '" + c + "' is both seen and unseen");
  }
  g.validate();
  if (train_scenes() + eval_scenes() > 1000) {
    throw ConfigError("gen.train_scenes + gen.eval_scenes must not exceed 1000");
  }
  return g;
}

trainer::ModelConfig RunConfig::model() const {
  trainer::ModelConfig m;
  m.seed = seed();
  const auto dim = as_uint("encoder.dim", get("encoder.dim"));
  m.frozen.dim = dim;
  m.frozen.seed = as_uint("encoder.seed", get("encoder.seed"));
  m.frozen.eps_align = as_double("encoder.eps_align", get("encoder.eps_align"));
  if (m.frozen.eps_align < 0.0) throw ConfigError("encoder.eps_align must be >= 0");
  if (dim == 0) throw ConfigError("encoder.dim must be positive");
  m.detector.dim = dim;
  m.detector.queries = as_uint("model.queries", get("model.queries"));
  m.detector.neighbors = as_uint("model.neighbors", get("model.neighbors"));
  m.detector.radius = as_double("model.radius", get("model.radius"));
  if (m.detector.queries == 0 || m.detector.neighbors == 0 || m.detector.radius <= 0.0) {
    throw ConfigError("model.queries, model.neighbors and model.radius must be positive");
  }
  m.ofca.dim = dim;
  m.ofca.alpha = as_double("ofca.alpha", get("ofca.alpha"));
  m.ofca.beta = as_double("ofca.beta", get("ofca.beta"));
  m.ofca.blocks = as_uint("ofca.blocks", get("ofca.blocks"));
  m.ofca.heads = as_uint("ofca.heads", get("ofca.heads"));
  m.ofca.nie_enabled = as_bool("ofca.nie", get("ofca.nie"));
  m.ofca.validate();
  return m;
}

trainer::TrainConfig RunConfig::train() const {
  trainer::TrainConfig t;
  t.seed = seed();
  t.lr = as_double("train.lr", get("train.lr"));
  t.weight_decay = as_double("train.weight_decay", get("train.weight_decay"));
  t.epochs = as_uint("train.epochs", get("train.epochs"));
  t.batch_size = as_uint("train.batch_size", get("train.batch_size"));
  t.eval_every = as_uint("train.eval_every", get("train.eval_every"));
  t.loss.tau = as_double("train.tau", get("train.tau"));
  t.loss.include_self = as_bool("train.include_self", get("train.include_self"));
  try {
    t.loss.indicator = icma::AlignmentIndicator::parse(get("train.indicator"));
  } catch (const InvalidIndicatorError& e) {
    throw ConfigError(std::string("train.indicator: ") + e.what());
  }
  t.validate();
  return t;
}

std::vector<std::string> RunConfig::prompts() const {
  const auto& p = get("eval.prompts");
  if (p == "*") return vocabulary();
  return split_list(p);
}

trainer::EvalConfig RunConfig::eval() const {
  trainer::EvalConfig e;
  e.prompts = prompts();
  e.thresholds.clear();
  for (const auto& t : split_list(get("eval.thresholds"))) {
    const double v = as_double("eval.thresholds", t);
    if (v <= 0.0 || v > 1.0) throw ConfigError("eval.thresholds must lie in (0, 1]");
    e.thresholds.push_back(v);
  }
  if (e.thresholds.empty()) throw ConfigError("eval.thresholds is empty");
  e.inference.tau = as_double("eval.tau", get("eval.tau"));
  if (e.inference.tau <= 0.0) throw ConfigError("eval.tau must be positive");
  e.inference.nms_iou = as_double("eval.nms_iou", get("eval.nms_iou"));
  e.baseline_shuffles = as_uint("eval.baseline_shuffles", get("eval.baseline_shuffles"));
  e.baseline_seed = seed();
  return e;
}

void RunConfig::validate() const {
  (void)gen();
  (void)model();
  (void)train();
  (void)eval();
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash_of(const std::vector<std::string>& prefixes) const {
  std::string text;
  for (const auto& [k, v] : values_) {
    const bool keep = std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) {
      return k == p || k.rfind(p + ".", 0) == 0;
    });
    if (keep) text += k + "=" + v + "\n";
  }
  return fnv1a_hex(text);
}

std::string RunConfig::config_hash() const { return fnv1a_hex(canonical()); }

std::string RunConfig::model_hash() const {
  return hash_of({"seed", "gen", "encoder", "model", "ofca", "train"});
}

std::string RunConfig::data_hash() const { return hash_of({"seed", "gen"}); }

}  // namespace hcma::harness
