#include "relapse/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "relapse/rng.hpp"

namespace relapse::eval {

void ConfusionCounts::add(bool prediction, int label) {
  if (label != 0) {
    prediction ? ++tp : ++fn;
  } else {
    prediction ? ++fp : ++tn;
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double precision(const ConfusionCounts& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f2_score(const ConfusionCounts& c) {
  if (c.tp == 0) return 0.0;
  const double tp = static_cast<double>(c.tp);
  return 5.0 * tp / (5.0 * tp + 4.0 * static_cast<double>(c.fn) + static_cast<double>(c.fp));
}

ConfusionCounts counts_of(const FoldResult& fold) {
  ConfusionCounts c;
  for (const auto& p : fold.predictions) c.add(p.prediction, p.label);
  return c;
}

ConfusionCounts pooled_counts(std::span<const FoldResult> folds) {
  ConfusionCounts c;
  for (const auto& f : folds) {
    if (!f.skipped) c += counts_of(f);
  }
  return c;
}

bool is_relapse_patient(const FoldResult& fold) {
  for (const auto& p : fold.predictions) {
    if (p.label != 0) return true;
  }
  return false;
}

double per_patient_f2(std::span<const FoldResult> folds) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& f : folds) {
    if (f.skipped || !is_relapse_patient(f)) continue;
    total += f2_score(counts_of(f));
    ++n;
  }
  if (n == 0) throw std::invalid_argument("per_patient_f2: no relapse patients");
  return total / static_cast<double>(n);
}

std::vector<FoldResult> build_relapse_test_set(std::span<const FoldResult> folds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("relapse test set fraction must be in (0,1]");
  std::vector<FoldResult> out;
  for (const auto& f : folds) {
    if (f.skipped || !is_relapse_patient(f)) continue;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < f.predictions.size(); ++i) {
      if (f.predictions[i].label == 0) negatives.push_back(i);
    }
    std::vector<bool> keep(f.predictions.size(), false);
    for (std::size_t i = 0; i < f.predictions.size(); ++i) keep[i] = f.predictions[i].label != 0;
    if (!negatives.empty()) {
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(negatives.size()))));
      Rng rng(derive_seed(seed, {f.fold}));
      for (std::size_t j : sample_without_replacement(negatives.size(), std::min(k, negatives.size()), rng)) {
        keep[negatives[j]] = true;
      }
    }
    FoldResult r = f;
    r.predictions.clear();
    for (std::size_t i = 0; i < f.predictions.size(); ++i) {
      if (keep[i]) r.predictions.push_back(f.predictions[i]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace relapse::eval
