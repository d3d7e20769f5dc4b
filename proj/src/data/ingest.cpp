#include "relapse/data/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "relapse/data/csv.hpp"
#include "relapse/errors.hpp"

namespace relapse::data {

namespace {

constexpr std::array<bool, kModalities> kNonNegative = {false, false, true, true, false, true};

void expect_fields(const std::vector<std::string>& f, std::size_t n, const CsvReader& r) {
  if (f.size() != n) r.fail("expected " + std::to_string(n) + " fields, got " + std::to_string(f.size()));
}

Date parse_date_field(const std::string& s, const CsvReader& r) {
  try {
    return parse_date(s);
  } catch (const DataError& e) {
    r.fail(e.what());
  }
}

}  // namespace

Cohort ingest_cohort(std::istream& patients, std::istream& sensing, std::istream& relapses,
                     const std::string& patients_name, const std::string& sensing_name,
                     const std::string& relapses_name) {
  Cohort cohort;
  std::unordered_map<std::string, std::size_t> index;

  CsvReader pr(patients, patients_name);
  pr.expect_header(kPatientsHeader);
  while (auto f = pr.next()) {
    expect_fields(*f, 6, pr);
    PatientProfile p;
    p.patient_id = (*f)[0];
    if (p.patient_id.empty()) pr.fail("empty patient_id");
    if (index.count(p.patient_id)) pr.fail("duplicate patient_id '" + p.patient_id + "'");
    p.age = parse_number((*f)[1], pr, "age");
    if (!(p.age > 0.0)) pr.fail("age must be positive");
    p.bprs = parse_optional_number((*f)[2], pr, "bprs");
    p.sfs = parse_optional_number((*f)[3], pr, "sfs");
    p.cdss = parse_optional_number((*f)[4], pr, "cdss");
    p.gpts = parse_optional_number((*f)[5], pr, "gpts");
    index.emplace(p.patient_id, cohort.patients.size());
    cohort.patients.push_back(std::move(p));
  }
  if (cohort.patients.empty()) throw DataError(patients_name + ": empty cohort (no patient rows)");

  // Accumulate sums/counts per (patient, date, hour, modality) to average duplicates.
  struct Acc {
    std::array<double, kModalities> sum{};
    std::array<int, kModalities> n{};
  };
  std::map<std::tuple<std::size_t, long, int>, Acc> hourly;
  CsvReader sr(sensing, sensing_name);
  sr.expect_header(kSensingHeader);
  std::size_t rows = 0;
  while (auto f = sr.next()) {
    expect_fields(*f, 3 + kModalities, sr);
    auto it = index.find((*f)[0]);
    if (it == index.end()) sr.fail("unknown patient_id '" + (*f)[0] + "'");
    const Date date = parse_date_field((*f)[1], sr);
    int hour = -1;
    const auto& hs = (*f)[2];
    auto res = std::from_chars(hs.data(), hs.data() + hs.size(), hour);
    if (res.ec != std::errc() || res.ptr != hs.data() + hs.size()) sr.fail("non-numeric hour '" + hs + "'");
    if (hour < 0 || hour > 23) sr.fail("hour " + std::to_string(hour) + " outside [0,23]");
    Acc& acc = hourly[{it->second, day_number(date), hour}];
    for (std::size_t k = 0; k < kModalities; ++k) {
      auto v = parse_optional_number((*f)[3 + k], sr, kModalityNames[k]);
      if (!v) continue;
      if (kNonNegative[k] && *v < 0.0) sr.fail("negative value in column " + std::string(kModalityNames[k]));
      acc.sum[k] += *v;
      acc.n[k] += 1;
    }
    ++rows;
  }
  if (rows == 0) throw DataError(sensing_name + ": no sensing rows");

  cohort.records.reserve(hourly.size());
  std::vector<std::pair<long, long>> span(cohort.patients.size(), {std::numeric_limits<long>::max(), std::numeric_limits<long>::min()});
  for (const auto& [key, acc] : hourly) {
    HourlyRecord rec;
    rec.patient = std::get<0>(key);
    rec.date = Date{std::chrono::days{std::get<1>(key)}};
    rec.hour = std::get<2>(key);
    for (std::size_t k = 0; k < kModalities; ++k)
      if (acc.n[k] > 0) rec.values[k] = acc.sum[k] / acc.n[k];
    auto& s = span[rec.patient];
    s.first = std::min(s.first, std::get<1>(key));
    s.second = std::max(s.second, std::get<1>(key));
    cohort.records.push_back(rec);
  }

  CsvReader rr(relapses, relapses_name);
  rr.expect_header(kRelapsesHeader);
  std::set<std::pair<std::string, long>> seen;
  while (auto f = rr.next()) {
    expect_fields(*f, 2, rr);
    auto it = index.find((*f)[0]);
    if (it == index.end()) rr.fail("unknown patient_id '" + (*f)[0] + "'");
    const Date d = parse_date_field((*f)[1], rr);
    const auto& s = span[it->second];
    if (s.first > s.second) rr.fail("relapse for patient '" + (*f)[0] + "' who has no sensing data");
    if (day_number(d) < s.first || day_number(d) > s.second) {
      rr.fail("relapse date " + (*f)[1] + " outside the monitoring span of '" + (*f)[0] + "'");
    }
    if (!seen.insert({(*f)[0], day_number(d)}).second) continue;
    cohort.relapses.push_back({(*f)[0], d});
  }
  std::sort(cohort.relapses.begin(), cohort.relapses.end(), [](const RelapseEvent& a, const RelapseEvent& b) {
    return std::tie(a.patient_id, a.relapse_date) < std::tie(b.patient_id, b.relapse_date);
  });
  return cohort;
}

Cohort ingest_cohort_files(const std::string& patients_path, const std::string& sensing_path,
                           const std::string& relapses_path) {
  std::ifstream p(patients_path), s(sensing_path), r(relapses_path);
  if (!p) throw DataError(patients_path + ": cannot open");
  if (!s) throw DataError(sensing_path + ": cannot open");
  if (!r) throw DataError(relapses_path + ": cannot open");
  return ingest_cohort(p, s, r, patients_path, sensing_path, relapses_path);
}

CohortSummary summarize(const Cohort& cohort) {
  CohortSummary s;
  s.patients = cohort.patients.size();
  s.relapse_instances = cohort.relapses.size();
  std::set<std::string> rp;
  for (const auto& r : cohort.relapses) rp.insert(r.patient_id);
  s.relapse_patients = rp.size();
  s.sensing_rows = cohort.records.size();
  std::vector<std::pair<long, long>> span(cohort.patients.size(), {std::numeric_limits<long>::max(), std::numeric_limits<long>::min()});
  double observed = 0.0;
  for (const auto& rec : cohort.records) {
    auto& sp = span[rec.patient];
    sp.first = std::min(sp.first, day_number(rec.date));
    sp.second = std::max(sp.second, day_number(rec.date));
    for (const auto& v : rec.values) observed += v ? 1.0 : 0.0;
  }
  double possible = 0.0;
  for (const auto& sp : span)
    if (sp.first <= sp.second) possible += static_cast<double>(sp.second - sp.first + 1) * kDayDim;
  s.coverage = possible > 0.0 ? observed / possible : 0.0;
  return s;
}

}  // namespace relapse::data
