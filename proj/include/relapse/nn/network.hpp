#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relapse/nn/layers.hpp"
#include "relapse/nn/losses.hpp"

namespace relapse::nn {

struct NetworkShape {
  std::size_t input_dim = 144;
  std::size_t hidden_dim = 128;
  std::size_t fc1 = 128;
  std::size_t fc2 = 64;
  double dropout_rate = 0.2;

  void validate() const;
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

struct NamedConstTensor {
  std::string name;
  const Matrix* tensor;
};

// Bi-LSTM -> dropout -> BN -> FC(relu) -> BN -> FC(relu) -> 1-unit sigmoid head.
struct NetworkParams {
  NetworkShape shape;
  LstmCellParams fwd;
  LstmCellParams bwd;
  BatchNormParams bn1;
  BatchNormParams bn2;
  Matrix fc1_w, fc1_b;
  Matrix fc2_w, fc2_b;
  Matrix head_w, head_b;

  NetworkParams() = default;
  explicit NetworkParams(const NetworkShape& s);

  static NetworkParams initialized(const NetworkShape& s, std::uint64_t seed);

  // Parameters updated by the optimizer, in a fixed order.
  std::vector<NamedTensor> trainable();
  std::vector<NamedConstTensor> trainable() const;
  // Every persisted tensor: trainable ones plus batch-norm running statistics.
  std::vector<NamedTensor> all_tensors();
  std::vector<NamedConstTensor> all_tensors() const;

  std::size_t parameter_count() const;
};

// One gradient per trainable tensor, in NetworkParams::trainable() order.
struct GradientBundle {
  std::vector<std::string> names;
  std::vector<Matrix> grads;

  static GradientBundle zeros_like(const NetworkParams& params);
  double squared_norm() const;
};

struct PassOptions {
  Mode mode = Mode::train;
  bool use_dropout = true;  // ignored in eval mode
  std::uint64_t dropout_seed = 0;
};

struct ForwardResult {
  std::vector<double> probabilities;
  Matrix embeddings;  // B x fc2, activations of the last hidden layer
  BatchNormParams bn1_updated;
  BatchNormParams bn2_updated;
};

// Each input is an M x D matrix (one row per day). Sequence lengths may differ.
ForwardResult network_forward(const NetworkParams& params, std::span<const Matrix> inputs, const PassOptions& opt);

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> probabilities;
  GradientBundle gradients;
  BatchNormParams bn1_updated;
  BatchNormParams bn2_updated;
};

// Loss and exact reverse-mode gradients (full BPTT) for a labelled batch.
BackwardResult network_backward(const NetworkParams& params, std::span<const Matrix> inputs,
                                std::span<const double> labels, LossKind loss, const PassOptions& opt);

}  // namespace relapse::nn
