#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hcma/matrix.hpp"

// Minimal reverse-mode differentiation over dense matrices. A graph is built
// eagerly by the op functions below and consumed by backward(). Parameters
// are long-lived leaf Vars with requires_grad set; everything else is
// rebuilt per forward pass.

namespace hcma::ad {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Matrix& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var scalar(double v);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad();
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows; }
  std::size_t cols() const { return node_->value.cols; }
  double item() const;
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Seeds d(root)/d(root) = 1 and propagates to every reachable node that
// requires a gradient. Gradients accumulate into leaf grad buffers.
void backward(const Var& root);

Var constant(Matrix m);

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a (r x c) + bias (1 x c) broadcast over rows.
Var add_row(const Var& a, const Var& bias);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);
// Elementwise standard normal density.
Var gaussian_density(const Var& a);
// |wrap(a)| with wrap into [-pi, pi).
Var periodic_abs(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
// Column-wise mean of all rows: (r x c) -> (1 x c).
Var mean_rows(const Var& a);
// Mean over consecutive row segments: segment k spans
// [offsets[k], offsets[k+1]).
Var segment_mean(const Var& a, std::span<const std::size_t> offsets);
// Column-wise maximum over the same segments; the gradient flows to the
// first row attaining each maximum.
Var segment_max(const Var& a, std::span<const std::size_t> offsets);
Var normalize_rows(const Var& a);
Var softmax_rows(const Var& a);
// Mean over elements of softplus(z) - t*z (binary cross entropy on logits).
Var bce_with_logits(const Var& logits, const Matrix& targets);
// Supervised InfoNCE over a logit matrix S (B x N). Row b's positive set is
// {j : positive(b,j)} and its normaliser runs over {j : allowed(b,j)}.
// Returns -(1/B) sum_b log(sum_pos e^S / sum_allowed e^S), evaluated with
// max subtraction.
Var masked_info_nce(const Var& logits, const std::vector<char>& positive,
                    const std::vector<char>& allowed);

}  // namespace hcma::ad
