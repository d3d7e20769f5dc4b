#pragma once

#include <span>
#include <string>
#include <vector>

namespace relapse::models {

enum class FusionScheme { mean, min, max };

FusionScheme parse_fusion(const std::string& s);
std::string to_string(FusionScheme s);

// Both inputs must lie in [0, 1].
double fuse_probabilities(double p1, double p2, FusionScheme scheme);
std::vector<double> fuse_probabilities(std::span<const double> a, std::span<const double> b, FusionScheme scheme);

}  // namespace relapse::models
