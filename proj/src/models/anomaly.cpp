#include "relapse/models/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relapse/errors.hpp"
#include "relapse/nn/layers.hpp"

namespace relapse::models {

Matrix invert_spd(const Matrix& a) {
  if (a.rows != a.cols || a.rows == 0) throw ShapeError("invert_spd: matrix must be square and non-empty");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) throw NumericError("covariance is not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  // Solve L L^T X = I column by column.
  Matrix inv(n, n);
  std::vector<double> y(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = i == c ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * inv(k, c);
      inv(i, c) = s / l(i, i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = m;
      inv(j, i) = m;
    }
  }
  return inv;
}

double mahalanobis_distance(std::span<const double> x, std::span<const double> mean, const Matrix& cov_inverse) {
  const std::size_t n = mean.size();
  if (x.size() != n || cov_inverse.rows != n || cov_inverse.cols != n) {
    throw ShapeError("mahalanobis_distance: dimension mismatch");
  }
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - mean[i];
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += cov_inverse(i, j) * d[j];
    q += d[i] * s;
  }
  if (q < 0.0) {
    if (q < -1e-9) throw NumericError("mahalanobis_distance: inverse covariance is not positive semi-definite");
    q = 0.0;
  }
  return std::sqrt(q);
}

GaussianModel fit_gaussian(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_gaussian: no rows");
  const std::size_t n = rows.front().size();
  GaussianModel g;
  g.mean.assign(n, 0.0);
  for (const auto& r : rows) {
    if (r.size() != n) throw ShapeError("fit_gaussian: ragged rows");
    for (std::size_t i = 0; i < n; ++i) g.mean[i] += r[i];
  }
  for (double& m : g.mean) m /= static_cast<double>(rows.size());
  g.covariance = Matrix(n, n);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < n; ++i) {
      const double di = r[i] - g.mean[i];
      for (std::size_t j = i; j < n; ++j) g.covariance(i, j) += di * (r[j] - g.mean[j]);
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      g.covariance(i, j) /= static_cast<double>(rows.size());
      g.covariance(j, i) = g.covariance(i, j);
    }
    trace += g.covariance(i, i);
  }
  g.ridge = trace > 0.0 ? 1e-3 * trace / static_cast<double>(n) : 1e-9;
  for (std::size_t i = 0; i < n; ++i) g.covariance(i, i) += g.ridge;
  g.inverse = invert_spd(g.covariance);
  return g;
}

ThresholdFit select_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("select_threshold: length mismatch");
  if (scores.empty()) throw std::invalid_argument("select_threshold: no scores");
  std::vector<double> unique(scores.begin(), scores.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  ThresholdFit best;
  if (unique.size() < 2) {
    best.degenerate = true;
    best.threshold = std::nextafter(unique.front(), std::numeric_limits<double>::infinity());
    return best;
  }
  // Sort once by score; sweeping thresholds upward moves windows from
  // predicted-positive to predicted-negative.
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::size_t positives = 0;
  for (int y : labels) positives += y != 0;
  std::size_t tp = positives, fp = scores.size() - positives;
  std::size_t k = 0;
  best.f2 = -1.0;
  for (std::size_t u = 0; u + 1 < unique.size(); ++u) {
    while (k < order.size() && scores[order[k]] <= unique[u]) {
      if (labels[order[k]] != 0) --tp; else --fp;
      ++k;
    }
    const double fn = static_cast<double>(positives - tp);
    const double denom = 5.0 * static_cast<double>(tp) + 4.0 * fn + static_cast<double>(fp);
    const double f2 = denom > 0.0 ? 5.0 * static_cast<double>(tp) / denom : 0.0;
    if (f2 > best.f2) {
      best.f2 = f2;
      best.threshold = 0.5 * (unique[u] + unique[u + 1]);
    }
  }
  return best;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

WindowAggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return WindowAggregation::mean;
  if (s == "max") return WindowAggregation::max;
  throw UsageError("unknown window aggregation '" + s + "' (expected mean|max)");
}

double AnomalyDetector::window_score(const Matrix& window) const {
  if (window.rows == 0) throw ShapeError("window_score: empty window");
  double total = 0.0, peak = 0.0;
  for (std::size_t d = 0; d < window.rows; ++d) {
    const auto e = encoder.encode(window.row(d));
    const double dist = mahalanobis_distance(e, healthy.mean, healthy.inverse);
    total += dist;
    peak = std::max(peak, dist);
  }
  return aggregation == WindowAggregation::max ? peak : total / static_cast<double>(window.rows);
}

AnomalyPrediction AnomalyDetector::predict_score(double score) const {
  AnomalyPrediction p;
  p.score = score;
  p.probability = nn::sigmoid((score - threshold.threshold) / scale);
  p.binary = score > threshold.threshold;
  return p;
}

AnomalyPrediction AnomalyDetector::predict(const Matrix& window) const { return predict_score(window_score(window)); }

AnomalyDetector fit_anomaly_detector(Autoencoder encoder, std::span<const std::vector<double>> healthy_days,
                                     std::span<const Matrix> windows, std::span<const int> labels,
                                     WindowAggregation aggregation) {
  if (healthy_days.empty()) throw std::invalid_argument("fit_anomaly_detector: no healthy days");
  AnomalyDetector det;
  det.aggregation = aggregation;
  det.encoder = std::move(encoder);
  std::vector<std::vector<double>> emb;
  emb.reserve(healthy_days.size());
  for (const auto& d : healthy_days) emb.push_back(det.encoder.encode(d));
  det.healthy = fit_gaussian(emb);
  std::vector<double> scores;
  scores.reserve(windows.size());
  for (const auto& w : windows) scores.push_back(det.window_score(w));
  det.threshold = select_threshold(scores, labels);
  const double iqr = quantile(scores, 0.75) - quantile(scores, 0.25);
  det.scale = iqr > 0.0 ? iqr : 1.0;
  return det;
}

}  // namespace relapse::models
