#include "relapse/models/fusion.hpp"

#include <algorithm>

#include "relapse/errors.hpp"

namespace relapse::models {

FusionScheme parse_fusion(const std::string& s) {
  if (s == "mean") return FusionScheme::mean;
  if (s == "min") return FusionScheme::min;
  if (s == "max") return FusionScheme::max;
  throw UsageError("unknown fusion scheme '" + s + "' (expected mean|min|max)");
}

std::string to_string(FusionScheme s) {
  switch (s) {
    case FusionScheme::mean: return "mean";
    case FusionScheme::min: return "min";
    case FusionScheme::max: return "max";
  }
  return "?";
}

double fuse_probabilities(double p1, double p2, FusionScheme scheme) {
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0)) {
    throw std::out_of_range("fuse_probabilities: inputs must lie in [0,1]");
  }
  switch (scheme) {
    case FusionScheme::min: return std::min(p1, p2);
    case FusionScheme::max: return std::max(p1, p2);
    case FusionScheme::mean: break;
  }
  // Clamped so rounding can never push the mean outside [min, max].
  return std::clamp(0.5 * (p1 + p2), std::min(p1, p2), std::max(p1, p2));
}

std::vector<double> fuse_probabilities(std::span<const double> a, std::span<const double> b, FusionScheme scheme) {
  if (a.size() != b.size()) throw ShapeError("fuse_probabilities: stream length mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fuse_probabilities(a[i], b[i], scheme);
  return out;
}

}  // namespace relapse::models
