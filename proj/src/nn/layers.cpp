#include "relapse/nn/layers.hpp"

#include <cmath>
#include <string>

#include "relapse/errors.hpp"

namespace relapse::nn {

LstmCellParams::LstmCellParams(std::size_t input, std::size_t hidden)
    : input_dim(input), hidden_dim(hidden), w_x(4 * hidden, input), w_h(4 * hidden, hidden), b(4 * hidden, 1) {
  if (input == 0 || hidden == 0) throw ShapeError("LSTM dims must be positive");
}

void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values) v = rng.uniform(-a, a);
}

void LstmCellParams::init(Rng& rng) {
  // Each gate block is its own (D -> H) / (H -> H) map for fan computation.
  glorot_uniform(w_x, input_dim, hidden_dim, rng);
  glorot_uniform(w_h, hidden_dim, hidden_dim, rng);
  b.fill(0.0);
  for (std::size_t j = 0; j < hidden_dim; ++j) b.values[hidden_dim + j] = 1.0;
}

void LstmCellParams::validate() const {
  const std::size_t g = 4 * hidden_dim;
  if (w_x.rows != g || w_x.cols != input_dim || w_h.rows != g || w_h.cols != hidden_dim || b.rows != g ||
      b.cols != 1) {
    throw ShapeError("LstmCellParams: weight shapes inconsistent with input_dim/hidden_dim");
  }
}

LstmState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
                         const LstmCellParams& p) {
  p.validate();
  const std::size_t H = p.hidden_dim;
  if (x.size() != p.input_dim || h_prev.size() != H || c_prev.size() != H) {
    throw ShapeError("lstm_cell_step: expected x of " + std::to_string(p.input_dim) + " and state of " +
                     std::to_string(H));
  }
  std::vector<double> z(4 * H);
  affine(p.w_x, x, p.b.values, z);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    const double* wr = p.w_h.values.data() + r * H;
    double acc = 0.0;
    for (std::size_t k = 0; k < H; ++k) acc += wr[k] * h_prev[k];
    z[r] += acc;
  }
  LstmState out{std::vector<double>(H), std::vector<double>(H)};
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(z[j]);
    const double f = sigmoid(z[H + j]);
    const double g = std::tanh(z[2 * H + j]);
    const double o = sigmoid(z[3 * H + j]);
    out.c[j] = f * c_prev[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  require_finite(out.h, "lstm_cell_step");
  require_finite(out.c, "lstm_cell_step");
  return out;
}

std::vector<double> bilstm_forward(const Matrix& sequence, const LstmCellParams& fwd, const LstmCellParams& bwd) {
  if (sequence.rows == 0) throw ShapeError("bilstm_forward: empty sequence");
  if (fwd.hidden_dim != bwd.hidden_dim) throw ShapeError("bilstm_forward: direction hidden sizes differ");
  const std::size_t H = fwd.hidden_dim;
  LstmState f{std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};
  for (std::size_t t = 0; t < sequence.rows; ++t) f = lstm_cell_step(sequence.row(t), f.h, f.c, fwd);
  LstmState b{std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};
  for (std::size_t t = sequence.rows; t-- > 0;) b = lstm_cell_step(sequence.row(t), b.h, b.c, bwd);
  std::vector<double> out(f.h);
  out.insert(out.end(), b.h.begin(), b.h.end());
  return out;
}

std::vector<double> dense_forward(std::span<const double> x, const Matrix& weights, std::span<const double> bias,
                                  Activation activation) {
  std::vector<double> y(weights.rows);
  affine(weights, x, bias, y);
  switch (activation) {
    case Activation::relu:
      for (double& v : y) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::sigmoid:
      for (double& v : y) v = sigmoid(v);
      break;
    case Activation::linear:
      break;
  }
  return y;
}

BatchNormParams::BatchNormParams(std::size_t features)
    : gamma(features, 1, 1.0), beta(features, 1, 0.0), running_mean(features, 1, 0.0), running_var(features, 1, 1.0) {}

void BatchNormParams::validate() const {
  const std::size_t f = gamma.rows;
  if (beta.rows != f || running_mean.rows != f || running_var.rows != f) {
    throw ShapeError("BatchNormParams: per-feature arrays differ in length");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("BatchNormParams: epsilon must be positive");
  if (!(momentum > 0.0 && momentum <= 1.0)) throw std::invalid_argument("BatchNormParams: momentum must be in (0,1]");
  for (double v : running_var.values) {
    if (v < 0.0) throw NumericError("BatchNormParams: negative running variance");
  }
}

BatchNormStats batchnorm_stats(const Matrix& batch, const BatchNormParams& params, Mode mode) {
  const std::size_t B = batch.rows;
  const std::size_t F = batch.cols;
  if (F != params.features()) throw ShapeError("batchnorm: feature count mismatch");
  BatchNormStats st{std::vector<double>(F), std::vector<double>(F), std::vector<double>(F)};
  if (mode == Mode::eval) {
    for (std::size_t j = 0; j < F; ++j) {
      st.mean[j] = params.running_mean.values[j];
      st.variance[j] = params.running_var.values[j];
      st.inv_std[j] = 1.0 / std::sqrt(st.variance[j] + params.epsilon);
    }
    return st;
  }
  if (B < 2) throw std::invalid_argument("batchnorm: train mode needs a batch of at least 2");
  for (std::size_t j = 0; j < F; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < B; ++i) mean += batch(i, j);
    mean /= static_cast<double>(B);
    double var = 0.0;
    for (std::size_t i = 0; i < B; ++i) var += (batch(i, j) - mean) * (batch(i, j) - mean);
    var /= static_cast<double>(B);
    st.mean[j] = mean;
    st.variance[j] = var;
    st.inv_std[j] = 1.0 / std::sqrt(var + params.epsilon);
  }
  return st;
}

BatchNormResult batchnorm_forward(const Matrix& batch, const BatchNormParams& params, Mode mode) {
  params.validate();
  const auto st = batchnorm_stats(batch, params, mode);
  const std::size_t B = batch.rows;
  const std::size_t F = batch.cols;
  BatchNormResult res{Matrix(B, F), params};
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < F; ++j) {
      res.out(i, j) = params.gamma.values[j] * ((batch(i, j) - st.mean[j]) * st.inv_std[j]) + params.beta.values[j];
    }
  }
  if (mode == Mode::train) {
    const double m = params.momentum;
    for (std::size_t j = 0; j < F; ++j) {
      res.params.running_mean.values[j] = (1.0 - m) * params.running_mean.values[j] + m * st.mean[j];
      res.params.running_var.values[j] = (1.0 - m) * params.running_var.values[j] + m * st.variance[j];
    }
  }
  return res;
}

std::vector<double> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

std::vector<double> dropout_apply(std::span<const double> x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  std::vector<double> y(x.begin(), x.end());
  if (mode == Mode::eval || rate == 0.0) return y;
  const auto mask = dropout_mask(x.size(), rate, seed);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return y;
}

}  // namespace relapse::nn
