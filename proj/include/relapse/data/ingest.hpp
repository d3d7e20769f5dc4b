#pragma once

#include <iosfwd>
#include <string>

#include "relapse/data/types.hpp"

namespace relapse::data {

inline constexpr const char* kPatientsHeader = "patient_id,age,bprs,sfs,cdss,gpts";
inline constexpr const char* kSensingHeader = "patient_id,date,hour,light,volume,conversation,distance,acc,screen";
inline constexpr const char* kRelapsesHeader = "patient_id,relapse_date";

// Validates and loads the three cohort CSVs. Errors are DataError with
// "file:line: reason". Duplicate (patient, date, hour) rows are averaged per
// modality over the values present.
Cohort ingest_cohort(std::istream& patients, std::istream& sensing, std::istream& relapses,
                     const std::string& patients_name = "patients.csv",
                     const std::string& sensing_name = "sensing.csv",
                     const std::string& relapses_name = "relapses.csv");

Cohort ingest_cohort_files(const std::string& patients_path, const std::string& sensing_path,
                           const std::string& relapses_path);

struct CohortSummary {
  std::size_t patients = 0;
  std::size_t relapse_patients = 0;
  std::size_t relapse_instances = 0;
  std::size_t sensing_rows = 0;
  double coverage = 0.0;  // observed modality-hours / possible modality-hours over each span
};

CohortSummary summarize(const Cohort& cohort);

}  // namespace relapse::data
