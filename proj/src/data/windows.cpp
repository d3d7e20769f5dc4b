#include "relapse/data/windows.hpp"

#include <stdexcept>

#include "relapse/errors.hpp"

namespace relapse::data {

void WindowConfig::validate() const {
  if (input_days <= 0 || step_days <= 0 || horizon_days <= 0) {
    throw UsageError("window config: M, step and horizon must be positive");
  }
  if (!(missing_day_fraction_limit >= 0.0 && missing_day_fraction_limit <= 1.0)) {
    throw UsageError("window config: missing_day_fraction_limit must be in [0,1]");
  }
  if (exclusion_days < 0) throw UsageError("window config: exclusion_days must be >= 0");
}

bool label_week(Date target_week_start, std::span<const Date> relapse_dates, int horizon_days) {
  const long lo = day_number(target_week_start);
  const long hi = lo + kTargetWeekDays - 1;
  for (Date r : relapse_dates) {
    const long rn = day_number(r);
    if (lo <= rn && hi >= rn - horizon_days) return true;
  }
  return false;
}

WindowSet make_windows(std::span<const PatientDays> patients, std::span<const std::vector<Date>> relapse_dates,
                       const WindowConfig& config) {
  config.validate();
  if (relapse_dates.size() != patients.size()) throw ShapeError("make_windows: relapse list per patient required");
  WindowSet set;
  const std::size_t M = static_cast<std::size_t>(config.input_days);
  const std::size_t need = M + kTargetWeekDays;
  for (std::size_t p = 0; p < patients.size(); ++p) {
    const auto& pd = patients[p];
    const auto& rel = relapse_dates[p];
    for (std::size_t s = 0; s + need <= pd.days.size(); s += static_cast<std::size_t>(config.step_days)) {
      ObservationWindow w;
      w.patient_id = pd.patient_id;
      w.patient = p;
      w.first_day = s;
      w.length = M;
      w.window_start = pd.days[s].date;
      w.target_week_start = pd.days[s + M].date;
      std::size_t masked = 0;
      for (std::size_t d = s; d < s + M; ++d) masked += pd.days[d].fully_masked() ? 1 : 0;
      if (static_cast<double>(masked) > config.missing_day_fraction_limit * static_cast<double>(M)) {
        ++set.dropped_low_coverage;
        continue;
      }
      if (config.exclusion_days > 0) {
        bool excluded = false;
        for (Date r : rel) {
          const long delta = day_number(w.target_week_start) - day_number(r);
          if (delta > 0 && delta <= config.exclusion_days) excluded = true;
        }
        if (excluded) {
          ++set.dropped_exclusion;
          continue;
        }
      }
      w.label = label_week(w.target_week_start, rel, config.horizon_days) ? 1 : 0;
      set.windows.push_back(std::move(w));
    }
  }
  return set;
}

WindowSet make_windows(std::span<const PatientDays> patients, const Cohort& cohort, const WindowConfig& config) {
  std::vector<std::vector<Date>> rel;
  for (const auto& p : patients) rel.push_back(cohort.relapse_dates(p.patient_id));
  return make_windows(patients, rel, config);
}

Matrix window_input(const PatientDays& days, const ObservationWindow& w, std::span<const std::size_t> dims) {
  if (w.first_day + w.length > days.days.size()) throw ShapeError("window_input: window exceeds patient days");
  const bool all = dims.empty();
  const std::size_t D = all ? kDayDim : dims.size();
  Matrix m(w.length, D);
  for (std::size_t t = 0; t < w.length; ++t) {
    const auto& v = days.days[w.first_day + t].values;
    for (std::size_t k = 0; k < D; ++k) m(t, k) = v[all ? k : dims[k]];
  }
  return m;
}

std::vector<double> window_time_mean(const PatientDays& days, const ObservationWindow& w,
                                     std::span<const std::size_t> dims) {
  const Matrix m = window_input(days, w, dims);
  std::vector<double> mean(m.cols, 0.0);
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t k = 0; k < m.cols; ++k) mean[k] += m(t, k);
  for (double& v : mean) v /= static_cast<double>(m.rows);
  return mean;
}

}  // namespace relapse::data
