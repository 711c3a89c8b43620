#include "matrix.hpp"

#include <cmath>

#include "common.hpp"

namespace rmcl {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.rows)
    throw config_error("matmul: inner dimensions differ (" +
                       std::to_string(a.cols) + " vs " +
                       std::to_string(b.rows) + ")");
  out.resize(a.rows, b.cols);
  const std::size_t p = a.cols, n = b.cols;
  const double* ad = a.data.data();
  const double* bd = b.data.data();
  double* cd = out.data.data();
  // i-k-j with a 4-way k unroll: every output element accumulates in
  // ascending k, so the result is independent of the worker split.
  parallel_for(0, a.rows, [=](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double* crow = cd + i * n;
      const double* arow = ad + i * p;
      std::size_t k = 0;
      for (; k + 4 <= p; k += 4) {
        const double a0 = arow[k], a1 = arow[k + 1];
        const double a2 = arow[k + 2], a3 = arow[k + 3];
        const double* b0 = bd + k * n;
        const double* b1 = b0 + n;
        const double* b2 = b1 + n;
        const double* b3 = b2 + n;
        for (std::size_t j = 0; j < n; ++j)
          crow[j] = ((((crow[j] + a0 * b0[j]) + a1 * b1[j]) + a2 * b2[j]) +
                     a3 * b3[j]);
      }
      for (; k < p; ++k) {
        const double aik = arow[k];
        const double* brow = bd + k * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
      }
    }
  });
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows != b.rows)
    throw config_error("matmul_tn: leading dimensions differ (" +
                       std::to_string(a.rows) + " vs " +
                       std::to_string(b.rows) + ")");
  out.resize(a.cols, b.cols);
  const std::size_t m = a.cols, n = b.cols, steps = a.rows;
  const double* ad = a.data.data();
  const double* bd = b.data.data();
  double* cd = out.data.data();
  // s-outer accumulation (ascending s per element) with a 4-way s unroll.
  parallel_for(0, m, [=](std::size_t lo, std::size_t hi) {
    std::size_t s = 0;
    for (; s + 4 <= steps; s += 4) {
      const double* a0 = ad + s * m;
      const double* a1 = a0 + m;
      const double* a2 = a1 + m;
      const double* a3 = a2 + m;
      const double* b0 = bd + s * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      for (std::size_t i = lo; i < hi; ++i) {
        const double w0 = a0[i], w1 = a1[i], w2 = a2[i], w3 = a3[i];
        double* crow = cd + i * n;
        for (std::size_t j = 0; j < n; ++j)
          crow[j] = ((((crow[j] + w0 * b0[j]) + w1 * b1[j]) + w2 * b2[j]) +
                     w3 * b3[j]);
      }
    }
    for (; s < steps; ++s) {
      const double* arow = ad + s * m;
      const double* brow = bd + s * n;
      for (std::size_t i = lo; i < hi; ++i) {
        const double asi = arow[i];
        double* crow = cd + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += asi * brow[j];
      }
    }
  });
}

Matrix transposed(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

void add_bias_rows(Matrix& m, const Vec& bias) {
  if (bias.size() != m.cols)
    throw config_error("add_bias_rows: bias length does not match columns");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
  }
}

Vec col_sums(const Matrix& m) {
  Vec sums(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) sums[j] += row[j];
  }
  return sums;
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void ensure_finite(std::span<const double> values, const std::string& what) {
  if (!all_finite(values))
    throw numeric_error("non-finite value in " + what);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw config_error("squared_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace rmcl
