#pragma once

#include <cstdint>
#include <vector>

#include "hcma/autograd.hpp"
#include "hcma/encoders.hpp"
#include "hcma/hdi.hpp"
#include "hcma/parameters.hpp"

// Object-focusing context adjustment: a noise-injection enhancement (NIE)
// stack followed by multi-head cross-attention from a level feature onto the
// object features of the same view or scene.

namespace hcma::ofca {

using encoders::Embedding;
using hdi::Level;

struct OFCAConfig {
  std::size_t dim = 32;
  double alpha = 0.5;
  double beta = 0.1;
  std::size_t blocks = 2;  // n stacked MLP blocks
  std::size_t heads = 4;
  // NIE off routes every level straight to the attention layer.
  bool nie_enabled = true;
  // Scale of the random part of the near-identity MLP initialisation and of
  // the attention output projection.
  double mlp_init = 0.01;
  double out_init = 0.1;

  void validate() const;
};

// Parameter names: nie<m>.w1, nie<m>.b1, nie<m>.w2, nie<m>.b2 for
// m = 1..blocks, then attn.wq, attn.wk, attn.wv, attn.wo. Weights act on row
// vectors (x * W).
struct OFCAParams {
  OFCAConfig cfg;
  ad::ParameterSet weights;

  static OFCAParams init(const OFCAConfig& cfg, std::uint64_t seed);
  void validate() const;
};

// Intermediates of one NIE pass: x[m-1] = MLP_m(x'_{m-1}) and
// x_prime[m-1] = x'_m for m = 1..n.
struct NieTrace {
  Matrix x0;
  std::vector<Matrix> x;
  std::vector<Matrix> x_prime;
};

// Applies the NIE stack to every row of x0; returns x'_n.
ad::Var nie_forward(const ad::Var& x0, const OFCAParams& params,
                    NieTrace* trace = nullptr);
// Throws NumericError on non-finite input.
Embedding nie_forward(const Embedding& x0, const OFCAParams& params,
                      NieTrace* trace = nullptr);

// Rows of `level_feats` attend over the rows of `object_feats`. NIE is
// applied first for view and scene levels (when enabled). Output rows are
// L2-normalised. Throws ContextMissingError when object_feats is empty.
ad::Var ofca_forward(const ad::Var& level_feats, const ad::Var& object_feats,
                     const OFCAParams& params, Level level);
Embedding ofca_forward(const Embedding& level_feat,
                       const std::vector<Embedding>& object_feats,
                       const OFCAParams& params, Level level);

// Every row attends only to itself: the softmax over a single key is 1, so
// this equals ofca_forward(row, {row}) for each row, computed in one pass.
ad::Var ofca_forward_self(const ad::Var& level_feats, const OFCAParams& params,
                          Level level);

// Per-head attention matrices (queries x objects) for the same inputs.
std::vector<Matrix> attention_weights(const Matrix& level_feats,
                                      const Matrix& object_feats,
                                      const OFCAParams& params, Level level);

}  // namespace hcma::ofca
