#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relapse/nn/network.hpp"

namespace relapse::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Central-difference check of `analytic` against `loss()` for every entry of
// `params`. Relative error is |a - n| / max(1e-6, |a| + |n|).
GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<Matrix* const> params,
                                  std::span<const std::string> names, std::span<const Matrix> analytic, double h);

// Checks network_backward on a labelled batch. The dropout seed is shared by the
// analytic and numeric passes so both see the same mask.
GradCheckReport finite_diff_grad_check(const NetworkParams& params, std::span<const Matrix> inputs,
                                       std::span<const double> labels, LossKind loss, double h, std::uint64_t seed);

}  // namespace relapse::nn
