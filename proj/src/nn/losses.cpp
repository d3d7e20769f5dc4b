#include "relapse/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relapse/errors.hpp"

namespace relapse::nn {

LossKind parse_loss(std::string_view name) {
  if (name == "bce") return LossKind::bce;
  if (name == "f2" || name == "soft_f2") return LossKind::soft_f2;
  throw UsageError("unknown loss '" + std::string(name) + "' (expected bce|f2)");
}

std::string_view to_string(LossKind kind) { return kind == LossKind::bce ? "bce" : "f2"; }

namespace {
void check_lengths(std::span<const double> p, std::span<const double> y, const char* who) {
  if (p.size() != y.size()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(p.size()) + " probabilities vs " +
                     std::to_string(y.size()) + " labels");
  }
  if (p.empty()) throw ShapeError(std::string(who) + ": empty batch");
}
}  // namespace

LossResult bce_loss(std::span<const double> p, std::span<const double> y) {
  check_lengths(p, y, "bce_loss");
  const double n = static_cast<double>(p.size());
  LossResult res{0.0, std::vector<double>(p.size(), 0.0)};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    res.loss -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
    if (p[i] > kProbClamp && p[i] < 1.0 - kProbClamp) {
      res.dloss_dp[i] = (-y[i] / pc + (1.0 - y[i]) / (1.0 - pc)) / n;
    }
  }
  res.loss /= n;
  return res;
}

LossResult soft_f2_loss(std::span<const double> p, std::span<const double> y) {
  check_lengths(p, y, "soft_f2_loss");
  LossResult res{1.0, std::vector<double>(p.size(), 0.0)};
  double tp = 0.0, sum_p = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    tp += p[i] * y[i];
    sum_p += p[i];
    positives += y[i];
  }
  if (positives <= 0.0) return res;
  // 5TP + 4FN + FP simplifies to sum(p) + 4 * positives.
  const double denom = sum_p + 4.0 * positives;
  res.loss = 1.0 - 5.0 * tp / denom;
  for (std::size_t i = 0; i < p.size(); ++i) {
    res.dloss_dp[i] = -(5.0 * y[i] * denom - 5.0 * tp) / (denom * denom);
  }
  return res;
}

LossResult compute_loss(LossKind kind, std::span<const double> p, std::span<const double> y) {
  return kind == LossKind::bce ? bce_loss(p, y) : soft_f2_loss(p, y);
}

}  // namespace relapse::nn
