#include "hcma/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "hcma/error.hpp"
#include "hcma/simd.hpp"

namespace hcma {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw DimensionMismatchError("matrix data size does not match shape");
  }
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(),
                std::vector<double>(values.begin(), values.end()));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionMismatchError("matmul: inner dimensions");
  Matrix out(a.rows, b.cols);
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* orow = out.data.data() + i * out.cols;
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double aip = a(i, p);
      if (aip != 0.0) k.axpy(aip, b.data.data() + p * b.cols, orow, b.cols);
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw DimensionMismatchError("matmul_nt: inner dimensions");
  }
  Matrix out(a.rows, b.rows);
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      out(i, j) = k.dot(arow, b.data.data() + j * b.cols, a.cols);
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) {
    throw DimensionMismatchError("matmul_tn: inner dimensions");
  }
  Matrix out(a.cols, b.cols);
  const auto& k = simd::active();
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* brow = b.data.data() + r * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double ari = a(r, i);
      if (ari != 0.0) k.axpy(ari, brow, out.data.data() + i * out.cols, b.cols);
    }
  }
  return out;
}

double l2_norm(std::span<const double> v) {
  return std::sqrt(simd::dot(v.data(), v.data(), v.size()));
}

}  // namespace hcma
