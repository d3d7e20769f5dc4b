#include "relapse/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "relapse/errors.hpp"

namespace relapse::nn {

namespace {
// Entries whose true gradient is below this sit under central-difference roundoff
// (about eps * loss / h) and would otherwise report noise as error.
constexpr double kRelativeFloor = 1e-6;
}  // namespace

GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<Matrix* const> params,
                                  std::span<const std::string> names, std::span<const Matrix> analytic, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("finite_diff_check: h must lie in [1e-7, 1e-3]");
  if (params.size() != analytic.size() || names.size() != params.size()) {
    throw ShapeError("finite_diff_check: parameter/gradient count mismatch");
  }
  GradCheckReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k]->values;
    if (w.size() != analytic[k].size()) throw ShapeError("finite_diff_check: shape mismatch for " + names[k]);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double up = loss();
      w[i] = orig - h;
      const double down = loss();
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k].values[i];
      const double rel = std::abs(a - numeric) / std::max(kRelativeFloor, std::abs(a) + std::abs(numeric));
      ++rep.checked;
      if (rel > rep.max_relative_error) {
        rep.max_relative_error = rel;
        rep.worst_tensor = names[k];
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

GradCheckReport finite_diff_grad_check(const NetworkParams& params, std::span<const Matrix> inputs,
                                       std::span<const double> labels, LossKind loss, double h, std::uint64_t seed) {
  PassOptions opt{Mode::train, true, seed};
  const auto analytic = network_backward(params, inputs, labels, loss, opt);
  NetworkParams probe = params;
  auto eval_loss = [&]() {
    const auto fwd = network_forward(probe, inputs, opt);
    return compute_loss(loss, fwd.probabilities, labels).loss;
  };
  std::vector<Matrix*> ptrs;
  std::vector<std::string> names;
  for (auto& t : probe.trainable()) {
    ptrs.push_back(t.tensor);
    names.push_back(t.name);
  }
  return finite_diff_check(eval_loss, ptrs, names, analytic.gradients.grads, h);
}

}  // namespace relapse::nn
