#include "relapse/synth/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "relapse/data/ingest.hpp"
#include "relapse/data/types.hpp"
#include "relapse/errors.hpp"
#include "relapse/rng.hpp"

namespace relapse::synth {

using data::kHours;
using data::kModalities;

void CohortSpec::validate() const {
  if (n_patients == 0) throw UsageError("synthetic cohort: n_patients must be > 0");
  if (days_per_patient == 0 || prodrome_days == 0) throw UsageError("synthetic cohort: day counts must be > 0");
  if (!(relapse_fraction >= 0.0 && relapse_fraction <= 1.0)) throw UsageError("relapse_fraction must be in [0,1]");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw UsageError("missing_rate must be in [0,1]");
  if (relapse_fraction > 0.0 && days_per_patient < 68) {
    throw UsageError("synthetic cohort: relapsing patients need at least 68 days");
  }
}

namespace {

struct ModalityModel {
  double night;  // mean at rest
  double peak;   // additional mean at peak activity
  double sd;     // hourly noise
  double lo, hi; // clip range
};

// light, volume, conversation (s), distance (m), acc, screen (s)
constexpr std::array<ModalityModel, kModalities> kModels = {{
    {20.0, 300.0, 60.0, 0.0, 1e5},
    {35.0, 20.0, 5.0, 0.0, 120.0},
    {120.0, 700.0, 150.0, 0.0, 3600.0},
    {40.0, 900.0, 200.0, 0.0, 1e5},
    {0.1, 0.6, 0.12, 0.0, 10.0},
    {60.0, 600.0, 150.0, 0.0, 3600.0},
}};

constexpr std::array<bool, kModalities> kTraitCoupled = {false, true, true, true, false, false};
constexpr std::array<bool, kModalities> kDrifting = {false, true, true, true, false, false};

double activity(std::size_t hour) {
  const double z = (static_cast<double>(hour) - 14.0) / 5.0;
  return std::exp(-z * z);
}

void append(std::string& out, const char* fmt, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, fmt, v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

CohortCsv generate_cohort(const CohortSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_patients;
  CohortCsv csv;
  csv.patients = std::string(data::kPatientsHeader) + "\n";
  csv.sensing = std::string(data::kSensingHeader) + "\n";
  csv.relapses = std::string(data::kRelapsesHeader) + "\n";

  const std::size_t n_relapse = static_cast<std::size_t>(std::llround(spec.relapse_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng assign(derive_seed(spec.seed, {0x5EEDu}));
  assign.shuffle(order);
  std::vector<bool> relapses(n, false);
  for (std::size_t k = 0; k < n_relapse; ++k) relapses[order[k]] = true;

  const std::size_t width = std::max<std::size_t>(3, std::to_string(n).size());
  const data::Date epoch = data::parse_date("2015-01-05");
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, {1, i}));
    std::string digits = std::to_string(i + 1);
    const std::string id = "P" + std::string(width - std::min<std::size_t>(width, digits.size()), '0') + digits;

    double age = rng.normal(37.2, 13.7);
    while (age < 18.0 || age > 70.0) age = rng.normal(37.2, 13.7);
    const double trait = rng.normal();
    auto correlated = [&]() { return 0.4 * trait + std::sqrt(1.0 - 0.16) * rng.normal(); };
    const double sfs = 110.0 + 15.0 * trait;
    const double bprs = std::max(18.0, 36.0 - 9.0 * correlated());
    const double cdss = std::max(0.0, 4.0 - 3.0 * correlated());
    const double gpts = std::max(32.0, 70.0 - 20.0 * correlated());
    csv.patients += id;
    append(csv.patients, ",%.1f", age);
    append(csv.patients, ",%.1f", bprs);
    append(csv.patients, ",%.1f", sfs);
    append(csv.patients, ",%.1f", cdss);
    append(csv.patients, ",%.1f", gpts);
    csv.patients += '\n';

    std::array<double, kModalities> offset{};
    for (std::size_t k = 0; k < kModalities; ++k) {
      offset[k] = spec.heterogeneity * rng.normal() + (kTraitCoupled[k] ? spec.trait_effect * trait : 0.0);
    }
    const data::Date start = epoch + std::chrono::days{static_cast<long>((i * 5) % 28)};
    long relapse_day = -1;
    if (relapses[i]) {
      const long lo = 60;
      const long hi = static_cast<long>(spec.days_per_patient) - 7;
      relapse_day = lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
      csv.relapses += id + "," + data::format_date(start + std::chrono::days{relapse_day}) + "\n";
    }

    for (std::size_t d = 0; d < spec.days_per_patient; ++d) {
      const long day = static_cast<long>(d);
      const bool prodrome =
          relapse_day >= 0 && day < relapse_day && day >= relapse_day - static_cast<long>(spec.prodrome_days);
      std::array<double, kModalities> daily{};
      for (auto& v : daily) v = spec.daily_noise * rng.normal();
      const std::string date = data::format_date(start + std::chrono::days{day});
      for (std::size_t h = 0; h < kHours; ++h) {
        std::array<double, kModalities> v{};
        std::array<bool, kModalities> present{};
        bool any = false;
        for (std::size_t k = 0; k < kModalities; ++k) {
          const auto& mm = kModels[k];
          double shift = offset[k] + daily[k];
          if (prodrome && kDrifting[k]) shift -= spec.drift_effect;
          const double mean = mm.night + mm.peak * activity(h) + shift * mm.sd;
          v[k] = std::clamp(mean + mm.sd * rng.normal(), mm.lo, mm.hi);
          present[k] = !rng.bernoulli(spec.missing_rate);
          any = any || present[k];
        }
        if (!any) continue;
        csv.sensing += id;
        csv.sensing += ',';
        csv.sensing += date;
        csv.sensing += ',';
        csv.sensing += std::to_string(h);
        for (std::size_t k = 0; k < kModalities; ++k) {
          csv.sensing += ',';
          if (present[k]) append(csv.sensing, "%.3f", v[k]);
        }
        csv.sensing += '\n';
      }
    }
  }
  return csv;
}

}  // namespace relapse::synth
