#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relapse/nn/matrix.hpp"
#include "relapse/nn/network.hpp"

namespace relapse::nn {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  double alpha = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(double learning_rate) : alpha(learning_rate) {}
  void validate() const;
};

// Bias-corrected ADAM on an arbitrary list of tensors. Moment buffers are
// created lazily on the first call.
void adam_update(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

void adam_update(NetworkParams& params, const GradientBundle& grads, AdamState& state);

}  // namespace relapse::nn
