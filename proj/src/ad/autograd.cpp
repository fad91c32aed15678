#include "hcma/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_set>

#include "hcma/error.hpp"
#include "hcma/simd.hpp"

namespace hcma::ad {

Matrix& Node::grad_buffer() {
  if (!grad.same_shape(value) || grad.data.empty()) {
    grad = Matrix(value.rows, value.cols);
  }
  return grad;
}

Var::Var(Matrix value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double v) { return Var(Matrix(1, 1, v)); }

void Var::zero_grad() {
  if (node_) node_->grad = Matrix();
}

double Var::item() const {
  if (node_->value.size() != 1) throw DimensionMismatchError("item() on non-scalar");
  return node_->value.data[0];
}

Var constant(Matrix m) { return Var(std::move(m), false); }

namespace {

using BackwardFn = std::function<void(Node&)>;

Var make(Matrix value, std::initializer_list<const Var*> parents,
         BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var* p : parents) {
    if (p->requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Var* p : parents) node->parents.push_back(p->node());
    node->backward_fn = std::move(fn);
  }
  return Var(std::move(node));
}

Var make_many(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& p : parents) {
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Var& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(fn);
  }
  return Var(std::move(node));
}

void accumulate(const std::shared_ptr<Node>& target, const Matrix& g) {
  if (!target->requires_grad) return;
  Matrix& buf = target->grad_buffer();
  simd::axpy(1.0, g.data.data(), buf.data.data(), g.data.size());
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionMismatchError(std::string(op) + ": shape mismatch");
  }
}

template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  Matrix out = a.value();
  for (double& v : out.data) v = f(v);
  return make(std::move(out), {&a}, [dfdx](Node& self) {
    const auto& in = self.parents[0]->value;
    Matrix g(in.rows, in.cols);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      g.data[i] = self.grad.data[i] * dfdx(in.data[i], self.value.data[i]);
    }
    accumulate(self.parents[0], g);
  });
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  return a - kTwoPi * std::floor((a + std::numbers::pi) / kTwoPi);
}

}  // namespace

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw DimensionMismatchError("backward() needs a scalar root");
  }
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.data.empty()) n->backward_fn(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  return make(hcma::matmul(a.value(), b.value()), {&a, &b}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& B = self.parents[1];
    if (A->requires_grad) accumulate(A, hcma::matmul_nt(self.grad, B->value));
    if (B->requires_grad) accumulate(B, hcma::matmul_tn(A->value, self.grad));
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  return make(hcma::matmul_nt(a.value(), b.value()), {&a, &b}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& B = self.parents[1];
    if (A->requires_grad) accumulate(A, hcma::matmul(self.grad, B->value));
    if (B->requires_grad) accumulate(B, hcma::matmul_tn(self.grad, A->value));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value();
  simd::axpy(1.0, b.value().data.data(), out.data.data(), out.size());
  return make(std::move(out), {&a, &b}, [](Node& self) {
    accumulate(self.parents[0], self.grad);
    accumulate(self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value();
  simd::axpy(-1.0, b.value().data.data(), out.data.data(), out.size());
  return make(std::move(out), {&a, &b}, [](Node& self) {
    accumulate(self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      Matrix neg = self.grad;
      for (double& v : neg.data) v = -v;
      accumulate(self.parents[1], neg);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
  return make(std::move(out), {&a, &b}, [](Node& self) {
    const auto& A = self.parents[0];
    const auto& B = self.parents[1];
    Matrix g(self.grad.rows, self.grad.cols);
    if (A->requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        g.data[i] = self.grad.data[i] * B->value.data[i];
      }
      accumulate(A, g);
    }
    if (B->requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        g.data[i] = self.grad.data[i] * A->value.data[i];
      }
      accumulate(B, g);
    }
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  return make(std::move(out), {&a}, [s](Node& self) {
    Matrix g = self.grad;
    for (double& v : g.data) v *= s;
    accumulate(self.parents[0], g);
  });
}

Var add_row(const Var& a, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionMismatchError("add_row: bias must be 1 x cols");
  }
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows; ++r) {
    simd::axpy(1.0, bias.value().data.data(), out.data.data() + r * out.cols,
               out.cols);
  }
  return make(std::move(out), {&a, &bias}, [](Node& self) {
    accumulate(self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      Matrix g(1, self.grad.cols);
      for (std::size_t r = 0; r < self.grad.rows; ++r) {
        simd::axpy(1.0, self.grad.data.data() + r * self.grad.cols,
                   g.data.data(), g.cols);
      }
      accumulate(self.parents[1], g);
    }
  });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var gaussian_density(const Var& a) {
  static const double kNorm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      a, [](double x) { return kNorm * std::exp(-0.5 * x * x); },
      [](double x, double y) { return -x * y; });
}

Var periodic_abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(wrap_angle(x)); },
      [](double x, double) {
        const double w = wrap_angle(x);
        return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
      });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return make(Matrix(1, 1, s), {&a}, [](Node& self) {
    const auto& in = self.parents[0]->value;
    accumulate(self.parents[0], Matrix(in.rows, in.cols, self.grad.data[0]));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionMismatchError("concat_cols: no parts");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionMismatchError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.value().data.data() + r * p.cols(), p.cols(),
                  out.data.data() + r * cols + off);
    }
    off += p.cols();
  }
  return make_many(std::move(out), parts, [](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t c = p->value.cols;
      if (p->requires_grad) {
        Matrix g(p->value.rows, c);
        for (std::size_t r = 0; r < g.rows; ++r) {
          std::copy_n(self.grad.data.data() + r * self.grad.cols + off, c,
                      g.data.data() + r * c);
        }
        accumulate(p, g);
      }
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionMismatchError("concat_rows: no parts");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionMismatchError("concat_rows: col mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(off * cols));
    off += p.rows();
  }
  return make_many(std::move(out), parts, [](Node& self) {
    std::size_t off = 0;
    const std::size_t cols = self.value.cols;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        Matrix g(p->value.rows, cols);
        std::copy_n(self.grad.data.data() + off * cols, g.size(), g.data.data());
        accumulate(p, g);
      }
      off += p->value.rows;
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  const std::size_t cols = a.cols();
  Matrix out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) throw DimensionMismatchError("gather_rows: index");
    std::copy_n(a.value().data.data() + rows[i] * cols, cols,
                out.data.data() + i * cols);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make(std::move(out), {&a}, [idx](Node& self) {
    const auto& in = self.parents[0]->value;
    Matrix g(in.rows, in.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      simd::axpy(1.0, self.grad.data.data() + i * in.cols,
                 g.data.data() + idx[i] * in.cols, in.cols);
    }
    accumulate(self.parents[0], g);
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw DimensionMismatchError("slice_cols: range");
  }
  const std::size_t w = end - begin;
  Matrix out(a.rows(), w);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.value().data.data() + r * a.cols() + begin, w,
                out.data.data() + r * w);
  }
  return make(std::move(out), {&a}, [begin, w](Node& self) {
    const auto& in = self.parents[0]->value;
    Matrix g(in.rows, in.cols);
    for (std::size_t r = 0; r < in.rows; ++r) {
      std::copy_n(self.grad.data.data() + r * w, w,
                  g.data.data() + r * in.cols + begin);
    }
    accumulate(self.parents[0], g);
  });
}

Var mean_rows(const Var& a) {
  const std::size_t offsets[2] = {0, a.rows()};
  return segment_mean(a, offsets);
}

Var segment_mean(const Var& a, std::span<const std::size_t> offsets) {
  if (offsets.size() < 2 || offsets.back() != a.rows()) {
    throw DimensionMismatchError("segment_mean: offsets must end at rows()");
  }
  const std::size_t segs = offsets.size() - 1;
  const std::size_t cols = a.cols();
  Matrix out(segs, cols);
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (hi <= lo) throw DimensionMismatchError("segment_mean: empty segment");
    double* orow = out.data.data() + s * cols;
    for (std::size_t r = lo; r < hi; ++r) {
      simd::axpy(1.0, a.value().data.data() + r * cols, orow, cols);
    }
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t c = 0; c < cols; ++c) orow[c] *= inv;
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return make(std::move(out), {&a}, [offs](Node& self) {
    const auto& in = self.parents[0]->value;
    Matrix g(in.rows, in.cols);
    for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(offs[s + 1] - offs[s]);
      const double* grow = self.grad.data.data() + s * in.cols;
      for (std::size_t r = offs[s]; r < offs[s + 1]; ++r) {
        simd::axpy(inv, grow, g.data.data() + r * in.cols, in.cols);
      }
    }
    accumulate(self.parents[0], g);
  });
}

Var segment_max(const Var& a, std::span<const std::size_t> offsets) {
  if (offsets.size() < 2 || offsets.back() != a.rows()) {
    throw DimensionMismatchError("segment_max: offsets must end at rows()");
  }
  const std::size_t segs = offsets.size() - 1;
  const std::size_t cols = a.cols();
  const Matrix& in = a.value();
  Matrix out(segs, cols);
  // Row index of each maximum; the first one wins on ties.
  std::vector<std::size_t> arg(segs * cols);
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (hi <= lo) throw DimensionMismatchError("segment_max: empty segment");
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = lo;
      for (std::size_t r = lo + 1; r < hi; ++r) {
        if (in(r, c) > in(best, c)) best = r;
      }
      out(s, c) = in(best, c);
      arg[s * cols + c] = best;
    }
  }
  return make(std::move(out), {&a}, [arg](Node& self) {
    const auto& in = self.parents[0]->value;
    Matrix g(in.rows, in.cols);
    for (std::size_t i = 0; i < arg.size(); ++i) {
      g(arg[i], i % in.cols) += self.grad.data[i];
    }
    accumulate(self.parents[0], g);
  });
}

Var normalize_rows(const Var& a) {
  Matrix out = a.value();
  std::vector<double> norms(out.rows);
  for (std::size_t r = 0; r < out.rows; ++r) {
    const double n = l2_norm(out.row_span(r));
    if (!(n > 1e-300) || !std::isfinite(n)) {
      throw NumericError("normalize_rows: zero or non-finite row norm");
    }
    norms[r] = n;
    for (double& v : out.row_span(r)) v /= n;
  }
  return make(std::move(out), {&a}, [norms](Node& self) {
    const std::size_t cols = self.value.cols;
    Matrix g(self.value.rows, cols);
    for (std::size_t r = 0; r < self.value.rows; ++r) {
      const double* y = self.value.data.data() + r * cols;
      const double* dy = self.grad.data.data() + r * cols;
      const double proj = simd::dot(y, dy, cols);
      for (std::size_t c = 0; c < cols; ++c) {
        g(r, c) = (dy[c] - y[c] * proj) / norms[r];
      }
    }
    accumulate(self.parents[0], g);
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row_span(r);
    const double m = simd::active().max(row.data(), row.size());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return make(std::move(out), {&a}, [](Node& self) {
    const std::size_t cols = self.value.cols;
    Matrix g(self.value.rows, cols);
    for (std::size_t r = 0; r < self.value.rows; ++r) {
      const double* y = self.value.data.data() + r * cols;
      const double* dy = self.grad.data.data() + r * cols;
      const double inner = simd::dot(y, dy, cols);
      for (std::size_t c = 0; c < cols; ++c) g(r, c) = y[c] * (dy[c] - inner);
    }
    accumulate(self.parents[0], g);
  });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  if (!logits.value().same_shape(targets)) {
    throw DimensionMismatchError("bce_with_logits: target shape");
  }
  const auto& z = logits.value().data;
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double sp = std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i])));
    total += sp - targets.data[i] * z[i];
  }
  return make(Matrix(1, 1, total / n), {&logits}, [targets, n](Node& self) {
    const auto& zv = self.parents[0]->value;
    Matrix g(zv.rows, zv.cols);
    const double up = self.grad.data[0] / n;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-zv.data[i]));
      g.data[i] = up * (s - targets.data[i]);
    }
    accumulate(self.parents[0], g);
  });
}

Var masked_info_nce(const Var& logits, const std::vector<char>& positive,
                    const std::vector<char>& allowed) {
  const Matrix& s = logits.value();
  if (positive.size() != s.size() || allowed.size() != s.size()) {
    throw DimensionMismatchError("masked_info_nce: mask shape");
  }
  const std::size_t rows = s.rows, cols = s.cols;
  if (rows == 0) throw ContractError("masked_info_nce: empty batch");
  // Numerator and denominator are separate log-sum-exps, each shifted by its
  // own maximum, so a positive set far below the row maximum cannot
  // underflow. Shifts and sums are cached for backward.
  std::vector<double> pshift(rows), shift(rows), num(rows), den(rows);
  double total = 0.0;
  for (std::size_t b = 0; b < rows; ++b) {
    double m = -std::numeric_limits<double>::infinity();
    double mp = m;
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t k = b * cols + j;
      if (positive[k] && !allowed[k]) {
        throw ContractError("masked_info_nce: positive outside candidate set");
      }
      if (allowed[k]) m = std::max(m, s.data[k]);
      if (positive[k]) mp = std::max(mp, s.data[k]);
    }
    if (!std::isfinite(mp)) throw ContractError("contrastive anchor has empty positive set");
    double nsum = 0.0, dsum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t k = b * cols + j;
      if (!allowed[k]) continue;
      dsum += std::exp(s.data[k] - m);
      if (positive[k]) nsum += std::exp(s.data[k] - mp);
    }
    pshift[b] = mp;
    shift[b] = m;
    num[b] = nsum;
    den[b] = dsum;
    total += (m + std::log(dsum)) - (mp + std::log(nsum));
  }
  const double inv_b = 1.0 / static_cast<double>(rows);
  return make(Matrix(1, 1, total * inv_b), {&logits},
              [positive, allowed, pshift, shift, num, den, inv_b](Node& self) {
                const auto& sv = self.parents[0]->value;
                Matrix g(sv.rows, sv.cols);
                const double up = self.grad.data[0] * inv_b;
                for (std::size_t b = 0; b < sv.rows; ++b) {
                  for (std::size_t j = 0; j < sv.cols; ++j) {
                    const std::size_t k = b * sv.cols + j;
                    if (!allowed[k]) continue;
                    double d = std::exp(sv.data[k] - shift[b]) / den[b];
                    if (positive[k]) d -= std::exp(sv.data[k] - pshift[b]) / num[b];
                    g.data[k] = up * d;
                  }
                }
                accumulate(self.parents[0], g);
              });
}

}  // namespace hcma::ad
