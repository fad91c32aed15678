#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hcma/error.hpp"
#include "hcma/trainer.hpp"

namespace hcma::trainer {
namespace {

using nlohmann::json;

json model_to_json(const ModelConfig& m) {
  const auto& f = m.frozen;
  const auto& d = m.detector;
  const auto& o = m.ofca;
  return {{"seed", m.seed},
          {"frozen", {{"dim", f.dim}, {"seed", f.seed}, {"eps_align", f.eps_align},
                      {"dominance", f.dominance}}},
          {"detector", {{"queries", d.queries}, {"neighbors", d.neighbors},
                        {"radius", d.radius}, {"hidden1", d.hidden1},
                        {"hidden2", d.hidden2}, {"dim", d.dim},
                        {"init_size", d.init_size}}},
          {"ofca", {{"dim", o.dim}, {"alpha", o.alpha}, {"beta", o.beta},
                    {"blocks", o.blocks}, {"heads", o.heads},
                    {"nie_enabled", o.nie_enabled}, {"mlp_init", o.mlp_init},
                    {"out_init", o.out_init}}}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& f = j.at("frozen");
  m.frozen.dim = f.at("dim");
  m.frozen.seed = f.at("seed");
  m.frozen.eps_align = f.at("eps_align");
  m.frozen.dominance = f.at("dominance");
  const auto& d = j.at("detector");
  m.detector.queries = d.at("queries");
  m.detector.neighbors = d.at("neighbors");
  m.detector.radius = d.at("radius");
  m.detector.hidden1 = d.at("hidden1");
  m.detector.hidden2 = d.at("hidden2");
  m.detector.dim = d.at("dim");
  m.detector.init_size = d.at("init_size");
  const auto& o = j.at("ofca");
  m.ofca.dim = o.at("dim");
  m.ofca.alpha = o.at("alpha");
  m.ofca.beta = o.at("beta");
  m.ofca.blocks = o.at("blocks");
  m.ofca.heads = o.at("heads");
  m.ofca.nie_enabled = o.at("nie_enabled");
  m.ofca.mlp_init = o.at("mlp_init");
  m.ofca.out_init = o.at("out_init");
  return m;
}

}  // namespace

Checkpoint snapshot(const Model& model, const AdamWState& state,
                    std::size_t epoch, std::size_t total_steps,
                    std::string config_hash, std::vector<MetricRow> history) {
  Checkpoint c;
  c.config_hash = std::move(config_hash);
  c.epoch = epoch;
  c.total_steps = total_steps;
  c.model = model.config;
  c.vocabulary = model.vocabulary;
  c.seen = model.seen;
  for (std::size_t i = 0; i < model.trainable.size(); ++i) {
    c.params[model.trainable.names()[i]] = model.trainable.vars()[i].value();
  }
  c.optimizer = state;
  c.history = std::move(history);
  return c;
}

void restore(Model& model, const Checkpoint& ckpt) {
  if (ckpt.params.size() != model.trainable.size()) {
    throw CompatibilityError("checkpoint parameter count does not match the model");
  }
  for (std::size_t i = 0; i < model.trainable.size(); ++i) {
    const auto it = ckpt.params.find(model.trainable.names()[i]);
    ad::Var& v = model.trainable.vars()[i];
    if (it == ckpt.params.end() || !it->second.same_shape(v.value())) {
      throw CompatibilityError("checkpoint lacks parameter " + model.trainable.names()[i]);
    }
    v.mutable_value() = it->second;
  }
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<Model>(ckpt.model, ckpt.vocabulary, ckpt.seen);
  restore(*model, ckpt);
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json params = json::object();
  for (const auto& [name, m] : c.params) {
    params[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
  }
  json history = json::array();
  for (const auto& r : c.history) {
    json row = {{"epoch", r.epoch}, {"step", r.step}, {"lr", r.lr},
                {"loss", r.loss},   {"align", r.align}, {"loc", r.loc}};
    if (r.eval_map25) row["eval_map25"] = *r.eval_map25;
    history.push_back(std::move(row));
  }
  const json j = {{"format", "hcma-checkpoint"},
                  {"version", Checkpoint::kVersion},
                  {"config_hash", c.config_hash},
                  {"epoch", c.epoch},
                  {"total_steps", c.total_steps},
                  {"model", model_to_json(c.model)},
                  {"vocabulary", c.vocabulary},
                  {"seen", c.seen},
                  {"params", params},
                  {"optimizer", {{"step", c.optimizer.step}, {"m", c.optimizer.m},
                                 {"v", c.optimizer.v}}},
                  {"history", history}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "hcma-checkpoint") {
    throw CompatibilityError(path.string() + " is not a checkpoint");
  }
  if (j.value("version", 0) != Checkpoint::kVersion) {
    throw CompatibilityError(path.string() + ": unsupported checkpoint version");
  }
  try {
    Checkpoint c;
    c.config_hash = j.at("config_hash");
    c.epoch = j.at("epoch");
    c.total_steps = j.at("total_steps");
    c.model = model_from_json(j.at("model"));
    c.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    c.seen = j.at("seen").get<std::vector<std::string>>();
    for (const auto& [name, p] : j.at("params").items()) {
      c.params[name] = Matrix(p.at("rows"), p.at("cols"),
                              p.at("data").get<std::vector<double>>());
    }
    const auto& o = j.at("optimizer");
    c.optimizer.step = o.at("step");
    c.optimizer.m = o.at("m").get<std::vector<double>>();
    c.optimizer.v = o.at("v").get<std::vector<double>>();
    for (const auto& r : j.at("history")) {
      MetricRow row;
      row.epoch = r.at("epoch");
      row.step = r.at("step");
      row.lr = r.at("lr");
      row.loss = r.at("loss");
      row.align = r.at("align");
      row.loc = r.at("loc");
      if (r.contains("eval_map25")) row.eval_map25 = r.at("eval_map25").get<double>();
      c.history.push_back(row);
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRow>& rows,
                       const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics " + path.string());
  out << "# config_hash=" << config_hash << '\n';
  out << "epoch,step,lr,loss,align,loc,eval_map25\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss << ',' << r.align
        << ',' << r.loc << ',';
    if (r.eval_map25) out << *r.eval_map25;
    out << '\n';
  }
  if (!out) throw IoError("failed writing metrics " + path.string());
}

}  // namespace hcma::trainer
