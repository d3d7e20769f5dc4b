#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace relapse::nn {

enum class LossKind { bce, soft_f2 };

LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind);

struct LossResult {
  double loss = 0.0;
  std::vector<double> dloss_dp;
};

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross entropy over the batch. Probabilities are clamped to
// [1e-7, 1-1e-7]; the gradient is zero for clamped entries.
LossResult bce_loss(std::span<const double> p, std::span<const double> y);

// Differentiable F2 surrogate built from soft confusion counts:
//   TP = sum p*y, FP = sum p*(1-y), FN = sum (1-p)*y
//   loss = 1 - 5TP / (5TP + 4FN + FP)
// A batch without positives has loss 1 and zero gradient.
LossResult soft_f2_loss(std::span<const double> p, std::span<const double> y);

LossResult compute_loss(LossKind kind, std::span<const double> p, std::span<const double> y);

}  // namespace relapse::nn
