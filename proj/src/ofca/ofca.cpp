#include "hcma/ofca.hpp"

#include <cmath>
#include <string>

#include "hcma/error.hpp"

namespace hcma::ofca {
namespace {

std::string block(std::size_t m, const char* w) {
  return "nie" + std::to_string(m) + "." + w;
}

Matrix near_identity(std::size_t d, double noise, std::uint64_t seed) {
  Matrix m = ad::xavier_uniform(d, d, seed);
  for (double& v : m.data) v *= noise;
  for (std::size_t i = 0; i < d; ++i) m(i, i) += 1.0;
  return m;
}

bool uses_nie(const OFCAParams& p, Level level) {
  return p.cfg.nie_enabled && level != Level::kObject;
}

struct Attention {
  ad::Var output;
  std::vector<ad::Var> weights;
};

Attention attend(const ad::Var& q_in, const ad::Var& ctx, const OFCAParams& p) {
  const std::size_t d = p.cfg.dim, h = p.cfg.heads, dh = d / h;
  const auto& w = p.weights;
  const ad::Var q = ad::matmul(q_in, w.get("attn.wq"));
  const ad::Var k = ad::matmul(ctx, w.get("attn.wk"));
  const ad::Var v = ad::matmul(ctx, w.get("attn.wv"));
  Attention out;
  std::vector<ad::Var> heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t i = 0; i < h; ++i) {
    const ad::Var qh = ad::slice_cols(q, i * dh, (i + 1) * dh);
    const ad::Var kh = ad::slice_cols(k, i * dh, (i + 1) * dh);
    const ad::Var vh = ad::slice_cols(v, i * dh, (i + 1) * dh);
    const ad::Var a = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv));
    out.weights.push_back(a);
    heads.push_back(ad::matmul(a, vh));
  }
  out.output = ad::matmul(ad::concat_cols(heads), w.get("attn.wo"));
  return out;
}

void check_inputs(const ad::Var& level_feats, const ad::Var& object_feats,
                  const OFCAParams& p) {
  if (!object_feats || object_feats.rows() == 0) {
    throw ContextMissingError("context adjustment needs object features");
  }
  if (level_feats.cols() != p.cfg.dim || object_feats.cols() != p.cfg.dim) {
    throw DimensionMismatchError("feature dimension differs from OFCA dimension");
  }
}

}  // namespace

void OFCAConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (blocks < 1) throw ConfigError("NIE needs at least one block");
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("dimension must be divisible by the head count");
  }
}

OFCAParams OFCAParams::init(const OFCAConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  OFCAParams p;
  p.cfg = cfg;
  const std::size_t d = cfg.dim;
  for (std::size_t m = 1; m <= cfg.blocks; ++m) {
    p.weights.add(block(m, "w1"), near_identity(d, cfg.mlp_init, seed + 10 * m + 1));
    p.weights.add(block(m, "b1"), Matrix(1, d));
    p.weights.add(block(m, "w2"), near_identity(d, cfg.mlp_init, seed + 10 * m + 2));
    p.weights.add(block(m, "b2"), Matrix(1, d));
  }
  p.weights.add("attn.wq", ad::xavier_uniform(d, d, seed + 101));
  p.weights.add("attn.wk", ad::xavier_uniform(d, d, seed + 102));
  p.weights.add("attn.wv", ad::xavier_uniform(d, d, seed + 103));
  Matrix wo = ad::xavier_uniform(d, d, seed + 104);
  for (double& v : wo.data) v *= cfg.out_init;
  p.weights.add("attn.wo", std::move(wo));
  return p;
}

void OFCAParams::validate() const {
  cfg.validate();
  for (std::size_t m = 1; m <= cfg.blocks; ++m) {
    if (!weights.contains(block(m, "w1"))) {
      throw ConfigError("missing NIE block " + std::to_string(m));
    }
  }
}

ad::Var nie_forward(const ad::Var& x0, const OFCAParams& p, NieTrace* trace) {
  const double alpha = p.cfg.alpha;
  // alpha * (x0 + beta * phi(x0)) is shared by every block.
  const ad::Var injected =
      ad::scale(ad::add(x0, ad::scale(ad::gaussian_density(x0), p.cfg.beta)), alpha);
  if (trace) {
    trace->x0 = x0.value();
    trace->x.clear();
    trace->x_prime.clear();
  }
  ad::Var prev = x0;
  for (std::size_t m = 1; m <= p.cfg.blocks; ++m) {
    const auto& w = p.weights;
    const ad::Var hidden =
        ad::tanh(ad::add_row(ad::matmul(prev, w.get(block(m, "w1"))), w.get(block(m, "b1"))));
    const ad::Var xm =
        ad::add_row(ad::matmul(hidden, w.get(block(m, "w2"))), w.get(block(m, "b2")));
    prev = ad::add(injected, ad::scale(xm, 1.0 - alpha));
    if (trace) {
      trace->x.push_back(xm.value());
      trace->x_prime.push_back(prev.value());
    }
  }
  return prev;
}

Embedding nie_forward(const Embedding& x0, const OFCAParams& p, NieTrace* trace) {
  for (double v : x0.values) {
    if (!std::isfinite(v)) throw NumericError("NIE input is not finite");
  }
  if (x0.dim() != p.cfg.dim) {
    throw DimensionMismatchError("NIE input dimension differs from OFCA dimension");
  }
  const ad::Var out = nie_forward(ad::constant(Matrix::row(x0.values)), p, trace);
  return Embedding{out.value().data, false};
}

ad::Var ofca_forward(const ad::Var& level_feats, const ad::Var& object_feats,
                     const OFCAParams& p, Level level) {
  check_inputs(level_feats, object_feats, p);
  const ad::Var query = uses_nie(p, level) ? nie_forward(level_feats, p) : level_feats;
  return ad::normalize_rows(ad::add(query, attend(query, object_feats, p).output));
}

ad::Var ofca_forward_self(const ad::Var& level_feats, const OFCAParams& p,
                          Level level) {
  check_inputs(level_feats, level_feats, p);
  const ad::Var query = uses_nie(p, level) ? nie_forward(level_feats, p) : level_feats;
  const auto& w = p.weights;
  // One key per row: the softmax is 1 and the value is the raw row.
  const ad::Var attended =
      ad::matmul(ad::matmul(level_feats, w.get("attn.wv")), w.get("attn.wo"));
  return ad::normalize_rows(ad::add(query, attended));
}

Embedding ofca_forward(const Embedding& level_feat,
                       const std::vector<Embedding>& object_feats,
                       const OFCAParams& p, Level level) {
  if (object_feats.empty()) {
    throw ContextMissingError("context adjustment needs object features");
  }
  const ad::Var out = ofca_forward(ad::constant(Matrix::row(level_feat.values)),
                                   ad::constant(encoders::stack(object_feats)), p, level);
  return Embedding{out.value().data, true};
}

std::vector<Matrix> attention_weights(const Matrix& level_feats,
                                      const Matrix& object_feats,
                                      const OFCAParams& p, Level level) {
  const ad::Var x = ad::constant(level_feats);
  const ad::Var ctx = ad::constant(object_feats);
  check_inputs(x, ctx, p);
  const ad::Var query = uses_nie(p, level) ? nie_forward(x, p) : x;
  std::vector<Matrix> out;
  for (const auto& a : attend(query, ctx, p).weights) out.push_back(a.value());
  return out;
}

}  // namespace hcma::ofca
