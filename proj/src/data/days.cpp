#include "relapse/data/days.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "relapse/errors.hpp"
#include "relapse/nn/param_io.hpp"

namespace relapse::data {

std::vector<PatientDays> build_day_vectors(const Cohort& cohort) {
  std::vector<PatientDays> out(cohort.patients.size());
  std::vector<std::pair<long, long>> span(cohort.patients.size(),
                                          {std::numeric_limits<long>::max(), std::numeric_limits<long>::min()});
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) out[i].patient_id = cohort.patients[i].patient_id;
  for (const auto& rec : cohort.records) {
    auto& s = span[rec.patient];
    s.first = std::min(s.first, day_number(rec.date));
    s.second = std::max(s.second, day_number(rec.date));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto [lo, hi] = span[i];
    if (lo > hi) continue;
    out[i].days.resize(static_cast<std::size_t>(hi - lo + 1));
    for (long d = lo; d <= hi; ++d) out[i].days[static_cast<std::size_t>(d - lo)].date = Date{std::chrono::days{d}};
  }
  for (const auto& rec : cohort.records) {
    auto& day = out[rec.patient].days[static_cast<std::size_t>(day_number(rec.date) - span[rec.patient].first)];
    for (std::size_t k = 0; k < kModalities; ++k) {
      if (!rec.values[k]) continue;
      const std::size_t idx = day_index(static_cast<std::size_t>(rec.hour), static_cast<Modality>(k));
      day.values[idx] = *rec.values[k];
      day.observed[idx] = true;
    }
  }
  return out;
}

bool DimMedians::empty() const { return std::none_of(available.begin(), available.end(), [](bool b) { return b; }); }

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

DimMedians medians_over(std::span<const PatientDays* const> patients) {
  DimMedians m;
  std::vector<double> buf;
  for (std::size_t d = 0; d < kDayDim; ++d) {
    buf.clear();
    for (const PatientDays* p : patients)
      for (const auto& day : p->days)
        if (day.observed[d]) buf.push_back(day.values[d]);
    if (!buf.empty()) {
      m.value[d] = median_of(buf);
      m.available[d] = true;
    }
  }
  return m;
}

}  // namespace

DimMedians patient_medians(const PatientDays& patient) {
  const PatientDays* p = &patient;
  return medians_over({&p, 1});
}

DimMedians reference_stats(std::span<const PatientDays> training) {
  std::vector<const PatientDays*> ptrs;
  for (const auto& p : training) ptrs.push_back(&p);
  return medians_over(ptrs);
}

DimMedians reference_stats(std::span<const PatientDays* const> training) { return medians_over(training); }

PatientDays impute_missing(const PatientDays& patient, const DimMedians& own, const DimMedians& reference) {
  if (reference.empty()) throw DataError("impute_missing: reference statistics are empty");
  PatientDays out = patient;
  for (auto& day : out.days) {
    for (std::size_t d = 0; d < kDayDim; ++d) {
      if (day.observed[d]) continue;
      day.values[d] = own.available[d] ? own.value[d] : reference.available[d] ? reference.value[d] : 0.0;
    }
  }
  return out;
}

PatientDays impute_missing(const PatientDays& patient, const DimMedians& reference) {
  return impute_missing(patient, patient_medians(patient), reference);
}

double Normalizer::apply(std::size_t dim, double x) const {
  const double lo = min[dim];
  const double hi = max[dim];
  if (!(hi > lo)) return 0.5;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

void Normalizer::apply_in_place(std::span<double> values) const {
  if (values.size() != min.size()) throw ShapeError("Normalizer: dimension mismatch");
  for (std::size_t d = 0; d < values.size(); ++d) values[d] = apply(d, values[d]);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Normalizer::digest() const {
  std::string s;
  for (std::size_t d = 0; d < min.size(); ++d) s += nn::format_double(min[d]) + "," + nn::format_double(max[d]) + ";";
  return fnv1a_hex(s);
}

Normalizer fit_normalizer(std::span<const DayVector* const> training) {
  if (training.empty()) throw DataError("fit_normalizer: no training day vectors");
  Normalizer n;
  n.min.assign(kDayDim, std::numeric_limits<double>::infinity());
  n.max.assign(kDayDim, -std::numeric_limits<double>::infinity());
  for (const DayVector* day : training) {
    for (std::size_t d = 0; d < kDayDim; ++d) {
      n.min[d] = std::min(n.min[d], day->values[d]);
      n.max[d] = std::max(n.max[d], day->values[d]);
    }
  }
  return n;
}

Normalizer fit_normalizer(std::span<const DayVector> training) {
  std::vector<const DayVector*> ptrs;
  for (const auto& d : training) ptrs.push_back(&d);
  return fit_normalizer(std::span<const DayVector* const>(ptrs));
}

std::vector<DayVector> apply_normalizer(const Normalizer& n, std::span<const DayVector> days) {
  std::vector<DayVector> out(days.begin(), days.end());
  for (auto& d : out) n.apply_in_place(d.values);
  return out;
}

}  // namespace relapse::data
