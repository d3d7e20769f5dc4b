#pragma once

#include <span>
#include <string>
#include <vector>

#include "relapse/models/autoencoder.hpp"
#include "relapse/nn/matrix.hpp"

namespace relapse::models {

// Inverse of a symmetric positive-definite matrix via Cholesky. Throws
// NumericError when the matrix is not positive definite.
Matrix invert_spd(const Matrix& a);

double mahalanobis_distance(std::span<const double> x, std::span<const double> mean, const Matrix& cov_inverse);

struct GaussianModel {
  std::vector<double> mean;
  Matrix covariance;  // ridge-regularized
  Matrix inverse;
  double ridge = 0.0;
};

// Mean and biased covariance of the rows, plus a ridge of 1e-3 * trace/dim
// (1e-9 when the trace is zero) on the diagonal.
GaussianModel fit_gaussian(std::span<const std::vector<double>> rows);

struct ThresholdFit {
  double threshold = 0.0;
  double f2 = 0.0;
  bool degenerate = false;  // fewer than two distinct scores
};

// Candidate thresholds are midpoints of consecutive sorted unique scores;
// prediction is score > threshold. Highest F2 wins, ties go to the smallest
// threshold.
ThresholdFit select_threshold(std::span<const double> scores, std::span<const int> labels);

struct AnomalyPrediction {
  double score = 0.0;
  double probability = 0.0;
  bool binary = false;
};

enum class WindowAggregation { mean, max };
WindowAggregation parse_aggregation(const std::string& s);

struct AnomalyDetector {
  Autoencoder encoder;
  WindowAggregation aggregation = WindowAggregation::mean;
  GaussianModel healthy;
  ThresholdFit threshold;
  double scale = 1.0;  // IQR of training window scores, 1 when degenerate

  // Mean (or max) per-day Mahalanobis distance of the window's day embeddings.
  double window_score(const Matrix& window) const;
  AnomalyPrediction predict(const Matrix& window) const;
  AnomalyPrediction predict_score(double score) const;
};

// Fits the healthy-state Gaussian on embeddings of `healthy_days`, then picks
// the decision threshold on the training windows' scores.
AnomalyDetector fit_anomaly_detector(Autoencoder encoder, std::span<const std::vector<double>> healthy_days,
                                     std::span<const Matrix> windows, std::span<const int> labels,
                                     WindowAggregation aggregation = WindowAggregation::mean);

// Linear-interpolated quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace relapse::models
