#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace relapse {

// Dense row-major matrix of doubles. Vectors are stored as n x 1.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  static Matrix column(std::span<const double> v);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v);

  bool operator==(const Matrix&) const = default;
};

bool all_finite(std::span<const double> v);

// Throws NumericError naming `where` if any entry is NaN/Inf.
void require_finite(std::span<const double> v, std::string_view where);

// y = W x + b, with W (out x in).
void affine(const Matrix& w, std::span<const double> x, std::span<const double> b, std::span<double> y);

}  // namespace relapse
