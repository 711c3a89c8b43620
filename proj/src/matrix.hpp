#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rmcl {

using Vec = std::vector<double>;

// Dense row-major f64 matrix. Shapes are validated at the kernel boundaries;
// public operations keep entries finite (checked where values can blow up).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::size_t size() const { return data.size(); }

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
};

// out = a * b. Inner loops keep a fixed per-element accumulation order
// (ascending k), so results are identical for any worker count.
void matmul(const Matrix& a, const Matrix& b, Matrix& out);

// out = transpose(a) * b, with a laid out [k x m] and b [k x n].
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);

Matrix transposed(const Matrix& m);

// Adds bias[j] to every row of m.
void add_bias_rows(Matrix& m, const Vec& bias);

// Column sums, in ascending row order.
Vec col_sums(const Matrix& m);

bool all_finite(std::span<const double> values);
// Throws numeric_error mentioning `what` when a non-finite entry is present.
void ensure_finite(std::span<const double> values, const std::string& what);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace rmcl
