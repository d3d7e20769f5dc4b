#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relapse/eval/experiment.hpp"

namespace relapse::eval {

using Points = std::vector<std::vector<double>>;

double euclidean(std::span<const double> a, std::span<const double> b);

// Per-column min-max scaling over the given rows (constant column -> 0.5).
Points minmax_normalize(std::span<const std::vector<double>> rows);

struct ClassDistances {
  std::vector<double> intra;  // non-relapse <-> non-relapse, i < j
  std::vector<double> inter;  // non-relapse <-> relapse
};

// Rows are window time-means; they are min-max normalized together before
// distances are taken. Throws std::invalid_argument if a class is empty.
ClassDistances class_distance_distributions(std::span<const std::vector<double>> features, std::span<const int> labels);

// Mean silhouette with Euclidean distance. Points in singleton clusters score
// 0, as do points with a = b = 0. Throws for fewer than two clusters.
double silhouette_coefficient(std::span<const std::vector<double>> points, std::span<const int> labels);

// Fraction of points whose nearest other point (lowest index on ties) shares
// their label.
double separability_index(std::span<const std::vector<double>> points, std::span<const int> labels);

// Throws NumericError("zero variance") when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Two-sided permutation p-value for Pearson r: (count(|r_perm| >= |r|) + 1) / (P + 1).
double permutation_p_value(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                           std::uint64_t seed);

struct DistanceAnalysisRecord {
  std::string patient_id;
  personalization::Stratum stratum = personalization::Stratum::closest;
  double dist = 0.0;       // mean donor distance of the stratum subset
  double dist_rand = 0.0;  // mean donor distance of random subsets
  double f2 = 0.0;
  double f2_rand = 0.0;

  double delta_dist() const { return dist_rand - dist; }
  double delta_f2() const { return f2 - f2_rand; }
};

struct DistanceAnalysis {
  std::vector<DistanceAnalysisRecord> records;
  double r = 0.0;
  double p = 1.0;
  std::size_t permutations = 0;
  std::vector<std::string> warnings;
};

// For every relapse patient: random-subset baseline vs each distance stratum
// (averaged over the settings' seeds), then Pearson r between the distance
// reduction and the F2 gain, with a seeded permutation p-value.
DistanceAnalysis sfs_distance_analysis(const data::Cohort& cohort, ExperimentSettings settings,
                                       std::span<const personalization::Stratum> strata,
                                       std::size_t permutations = 10000);

}  // namespace relapse::eval
