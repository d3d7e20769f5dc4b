#include "relapse/nn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relapse/errors.hpp"

namespace relapse {

Matrix Matrix::column(std::span<const double> v) {
  Matrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.values.begin());
  return m;
}

void Matrix::fill(double v) { std::fill(values.begin(), values.end(), v); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> v, std::string_view where) {
  if (!all_finite(v)) throw NumericError("non-finite value in " + std::string(where));
}

void affine(const Matrix& w, std::span<const double> x, std::span<const double> b, std::span<double> y) {
  if (w.cols != x.size() || w.rows != y.size() || (!b.empty() && b.size() != w.rows)) {
    throw ShapeError("affine: W is " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                     ", x has " + std::to_string(x.size()) + ", y has " + std::to_string(y.size()));
  }
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.values.data() + r * w.cols;
    double acc = b.empty() ? 0.0 : b[r];
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

}  // namespace relapse
