#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "relapse/nn/matrix.hpp"
#include "relapse/rng.hpp"

namespace relapse::nn {

enum class Mode { train, eval };
enum class Activation { relu, linear, sigmoid };

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// One direction of an LSTM. Gate blocks are stacked row-wise in the order
// input, forget, cell-candidate, output: rows [k*H, (k+1)*H) belong to gate k.
struct LstmCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w_x;  // 4H x D
  Matrix w_h;  // 4H x H
  Matrix b;    // 4H x 1

  LstmCellParams() = default;
  LstmCellParams(std::size_t input, std::size_t hidden);

  // Glorot-uniform weights, zero biases, forget-gate bias 1.
  void init(Rng& rng);
  void validate() const;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

LstmState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                         std::span<const double> c_prev, const LstmCellParams& params);

// `sequence` is M x D (one row per step). Returns [h_fwd(final), h_bwd(final)],
// where the backward cell consumes the rows in reverse order.
std::vector<double> bilstm_forward(const Matrix& sequence, const LstmCellParams& fwd, const LstmCellParams& bwd);

std::vector<double> dense_forward(std::span<const double> x, const Matrix& weights, std::span<const double> bias,
                                  Activation activation);

struct BatchNormParams {
  Matrix gamma;         // F x 1
  Matrix beta;          // F x 1
  Matrix running_mean;  // F x 1
  Matrix running_var;   // F x 1
  double momentum = 0.1;
  double epsilon = 1e-5;

  BatchNormParams() = default;
  explicit BatchNormParams(std::size_t features);
  std::size_t features() const { return gamma.rows; }
  void validate() const;
};

// Per-feature centering and inverse scale: batch statistics in train mode,
// running statistics in eval mode.
struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> inv_std;
};
BatchNormStats batchnorm_stats(const Matrix& batch, const BatchNormParams& params, Mode mode);

struct BatchNormResult {
  Matrix out;
  BatchNormParams params;
};

// `batch` is B x F. Train mode normalizes with the (biased) batch variance and
// folds the batch statistics into the running averages with `momentum`.
BatchNormResult batchnorm_forward(const Matrix& batch, const BatchNormParams& params, Mode mode);

// Inverted dropout: kept units are scaled by 1/(1-rate) so eval mode is identity.
std::vector<double> dropout_apply(std::span<const double> x, double rate, Mode mode, std::uint64_t seed);

// Same mask as dropout_apply(x, rate, train, seed) produces, as multiplicative factors.
std::vector<double> dropout_mask(std::size_t n, double rate, std::uint64_t seed);

// Glorot-uniform fill of an out x in matrix.
void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace relapse::nn
