#pragma once

#include <span>
#include <string>
#include <vector>

#include "relapse/data/types.hpp"
#include "relapse/nn/matrix.hpp"

namespace relapse::data {

struct WindowConfig {
  int input_days = 28;    // M
  int step_days = 7;
  int horizon_days = 30;  // "within a month" of a relapse
  double missing_day_fraction_limit = 0.5;
  int exclusion_days = 0;  // drop windows whose target week starts within this many days after a relapse

  void validate() const;
};

inline constexpr int kTargetWeekDays = 7;

// An M-day input span followed by a 7-day target week. The input days are
// days[first_day, first_day + length) of the owning PatientDays.
struct ObservationWindow {
  std::string patient_id;
  std::size_t patient = 0;    // index into the cohort / PatientDays list
  std::size_t first_day = 0;  // offset into PatientDays::days
  std::size_t length = 0;
  Date window_start{};
  Date target_week_start{};
  int label = 0;
};

struct WindowSet {
  std::vector<ObservationWindow> windows;  // grouped by patient, date-ordered
  std::size_t dropped_low_coverage = 0;
  std::size_t dropped_exclusion = 0;
};

// Positive iff [start, start+6] intersects [r - horizon, r] for some relapse r.
bool label_week(Date target_week_start, std::span<const Date> relapse_dates, int horizon_days);

WindowSet make_windows(std::span<const PatientDays> patients, const Cohort& cohort, const WindowConfig& config);
WindowSet make_windows(std::span<const PatientDays> patients, std::span<const std::vector<Date>> relapse_dates,
                       const WindowConfig& config);

// M x |dims| input matrix for a window, optionally restricted to a column subset.
Matrix window_input(const PatientDays& days, const ObservationWindow& w, std::span<const std::size_t> dims);

// 144-dim (or |dims|) mean over the window's days.
std::vector<double> window_time_mean(const PatientDays& days, const ObservationWindow& w,
                                     std::span<const std::size_t> dims);

}  // namespace relapse::data
