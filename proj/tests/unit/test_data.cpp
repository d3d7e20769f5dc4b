#include <doctest.h>

#include <sstream>

#include "relapse/data/days.hpp"
#include "relapse/data/ingest.hpp"
#include "relapse/data/windows.hpp"
#include "relapse/errors.hpp"
#include "relapse/rng.hpp"
#include "relapse/synth/generator.hpp"

using namespace relapse;
using namespace relapse::data;

namespace {

const Date kDay0 = parse_date("2016-03-01");

std::string date_at(long d) { return format_date(kDay0 + std::chrono::days{d}); }

std::string patients_csv(std::initializer_list<std::string> ids) {
  std::string s = std::string(kPatientsHeader) + "\n";
  for (const auto& id : ids) s += id + ",30,40,110,3,60\n";
  return s;
}

// Every hour of days [0, n) fully observed with value `base + hour`.
std::string full_sensing(const std::string& id, long n, double base = 1.0) {
  std::string s;
  for (long d = 0; d < n; ++d) {
    for (int h = 0; h < 24; ++h) {
      const std::string v = std::to_string(base + h);
      s += id + "," + date_at(d) + "," + std::to_string(h);
      for (int k = 0; k < 6; ++k) s += "," + v;
      s += "\n";
    }
  }
  return s;
}

Cohort ingest(const std::string& p, const std::string& s, const std::string& r) {
  std::istringstream pi(p), si(std::string(kSensingHeader) + "\n" + s), ri(std::string(kRelapsesHeader) + "\n" + r);
  return ingest_cohort(pi, si, ri);
}

std::string error_of(const std::string& p, const std::string& s, const std::string& r) {
  try {
    ingest(p, s, r);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// Day-by-day oracle for the week label.
bool oracle_label(long week_start, const std::vector<long>& relapses, int horizon) {
  for (long d = week_start; d < week_start + 7; ++d)
    for (long r : relapses)
      if (d >= r - horizon && d <= r) return true;
  return false;
}

std::vector<Date> dates_of(const std::vector<long>& days) {
  std::vector<Date> out;
  for (long d : days) out.push_back(kDay0 + std::chrono::days{d});
  return out;
}

PatientDays synthetic_days(std::size_t n, std::size_t masked_every = 0) {
  PatientDays p{"P1", {}};
  for (std::size_t d = 0; d < n; ++d) {
    DayVector v;
    v.date = kDay0 + std::chrono::days{static_cast<long>(d)};
    const bool masked = masked_every != 0 && d % masked_every == 0;
    for (std::size_t i = 0; i < kDayDim; ++i) {
      v.values[i] = static_cast<double>(d);
      v.observed[i] = !masked;
    }
    p.days.push_back(v);
  }
  return p;
}

}  // namespace

TEST_CASE("ingest validates rows") {
  const auto pats = patients_csv({"A", "B"});
  SUBCASE("well-formed input") {
    const auto c = ingest(pats, full_sensing("A", 2) + full_sensing("B", 1), "A," + date_at(1) + "\n");
    CHECK(c.patients.size() == 2);
    CHECK(c.records.size() == 72);
    CHECK(c.relapse_dates("A") == dates_of({1}));
    CHECK(c.relapse_dates("B").empty());
  }
  SUBCASE("unknown patient reports the row") {
    const auto e = error_of(pats, "Z," + date_at(0) + ",3,1,1,1,1,1,1\n", "");
    CHECK(e.find("sensing.csv:2") != std::string::npos);
    CHECK(e.find("unknown patient_id 'Z'") != std::string::npos);
  }
  SUBCASE("hour out of range") {
    CHECK(error_of(pats, "A," + date_at(0) + ",24,1,1,1,1,1,1\n", "").find("outside [0,23]") != std::string::npos);
  }
  SUBCASE("non-numeric value") {
    CHECK(error_of(pats, "A," + date_at(0) + ",3,abc,1,1,1,1,1\n", "").find("non-numeric") != std::string::npos);
  }
  SUBCASE("empty sensing file") { CHECK(error_of(pats, "", "").find("no sensing rows") != std::string::npos); }
  SUBCASE("empty cohort") {
    CHECK(error_of(std::string(kPatientsHeader) + "\n", "", "").find("empty cohort") != std::string::npos);
  }
  SUBCASE("duplicate patient") {
    CHECK(error_of(patients_csv({"A", "A"}), full_sensing("A", 1), "").find("duplicate") != std::string::npos);
  }
  SUBCASE("relapse outside the monitoring span") {
    CHECK(error_of(pats, full_sensing("A", 2), "A," + date_at(9) + "\n").find("outside the monitoring span") !=
          std::string::npos);
  }
  SUBCASE("bad header") {
    std::istringstream p("id,age\n"), s(""), r("");
    CHECK_THROWS_AS(ingest_cohort(p, s, r), DataError);
  }
}

TEST_CASE("duplicate hourly rows are averaged") {
  const std::string rows = "A," + date_at(0) + ",5,2,,,,,\nA," + date_at(0) + ",5,4,,,,,\n";
  const auto c = ingest(patients_csv({"A"}), rows, "");
  REQUIRE(c.records.size() == 1);
  CHECK(*c.records[0].values[0] == 3.0);
  CHECK_FALSE(c.records[0].values[1].has_value());
}

TEST_CASE("63-patient synthetic cohort ingests") {
  synth::CohortSpec spec;
  spec.n_patients = 63;
  spec.days_per_patient = 70;
  const auto csv = synth::generate_cohort(spec);
  std::istringstream p(csv.patients), s(csv.sensing), r(csv.relapses);
  const auto c = ingest_cohort(p, s, r);
  CHECK(c.patients.size() == 63);
}

TEST_CASE("day vectors") {
  SUBCASE("fully observed day is placed hour-major") {
    const auto c = ingest(patients_csv({"A"}), full_sensing("A", 1, 10.0), "");
    const auto days = build_day_vectors(c);
    REQUIRE(days.size() == 1);
    REQUIRE(days[0].days.size() == 1);
    const auto& v = days[0].days[0];
    for (std::size_t h = 0; h < 24; ++h) {
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(v.observed[h * 6 + k]);
        CHECK(v.values[h * 6 + k] == 10.0 + static_cast<double>(h));
      }
    }
  }
  SUBCASE("modality columns follow the sensing header order") {
    const auto c = ingest(patients_csv({"A"}), "A," + date_at(0) + ",2,1,2,3,4,5,6\n", "");
    const auto v = build_day_vectors(c)[0].days[0];
    for (std::size_t k = 0; k < 6; ++k) CHECK(v.values[day_index(2, static_cast<Modality>(k))] == k + 1.0);
    CHECK(day_index(0, Modality::screen) == 5);
    CHECK(kModalityNames[2] == "conversation");
  }
  SUBCASE("a date gap yields fully masked days") {
    const std::string rows = "A," + date_at(0) + ",0,1,1,1,1,1,1\nA," + date_at(4) + ",0,1,1,1,1,1,1\n";
    const auto days = build_day_vectors(ingest(patients_csv({"A"}), rows, ""))[0].days;
    REQUIRE(days.size() == 5);
    for (int d = 1; d <= 3; ++d) CHECK(days[d].fully_masked());
    CHECK_FALSE(days[0].fully_masked());
    CHECK_FALSE(days[4].fully_masked());
  }
}

TEST_CASE("imputation") {
  SUBCASE("no missing entries is the identity") {
    const auto p = synthetic_days(5);
    const auto ref = patient_medians(p);
    const auto out = impute_missing(p, ref);
    for (std::size_t d = 0; d < 5; ++d) CHECK(out.days[d].values == p.days[d].values);
  }
  SUBCASE("own median for the same modality and hour") {
    std::string rows;
    const double light[] = {10, 20, 30};
    for (int d = 0; d < 3; ++d) rows += "A," + date_at(d) + ",9," + std::to_string(light[d]) + ",1,1,1,1,1\n";
    rows += "A," + date_at(3) + ",9,,1,1,1,1,1\n";
    const auto p = build_day_vectors(ingest(patients_csv({"A"}), rows, ""))[0];
    const auto all = std::vector<PatientDays>{p};
    const auto out = impute_missing(p, reference_stats(all));
    const std::size_t dim = day_index(9, Modality::light);
    CHECK_FALSE(out.days[3].observed[dim]);
    CHECK(out.days[3].values[dim] == 20.0);
  }
  SUBCASE("reference median when the patient never observed a dimension") {
    auto p = synthetic_days(3);
    const std::size_t dim = day_index(4, Modality::conversation);
    for (auto& d : p.days) d.observed[dim] = false;
    DimMedians ref;
    ref.value[dim] = 77.0;
    ref.available[dim] = true;
    const auto out = impute_missing(p, ref);
    for (const auto& d : out.days) {
      CHECK(d.values[dim] == 77.0);
      CHECK_FALSE(d.observed[dim]);
    }
  }
  SUBCASE("empty reference statistics") { CHECK_THROWS_AS(impute_missing(synthetic_days(2), DimMedians{}), DataError); }
}

TEST_CASE("normalizer") {
  std::vector<DayVector> train(2);
  for (std::size_t i = 0; i < kDayDim; ++i) {
    train[0].values[i] = 0.0;
    train[1].values[i] = i == 7 ? 0.0 : 10.0;
  }
  const auto n = fit_normalizer(train);
  CHECK(n.apply(0, 5.0) == 0.5);
  CHECK(n.apply(0, 20.0) == 1.0);
  CHECK(n.apply(0, -3.0) == 0.0);
  CHECK(n.apply(7, 0.0) == 0.5);
  CHECK(n.apply(7, 123.0) == 0.5);
  CHECK_THROWS_AS(fit_normalizer(std::span<const DayVector>{}), DataError);

  Rng rng(12);
  std::vector<DayVector> fit(5), probe(50);
  for (auto* set : {&fit, &probe})
    for (auto& d : *set)
      for (double& v : d.values) v = rng.uniform(-100.0, 100.0);
  const auto m = fit_normalizer(fit);
  for (const auto& d : apply_normalizer(m, probe)) {
    for (double v : d.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("week labels") {
  const auto r = dates_of({100});
  CHECK(label_week(kDay0 + std::chrono::days{75}, r, 30));
  CHECK_FALSE(label_week(kDay0 + std::chrono::days{30}, r, 30));
  CHECK(label_week(kDay0 + std::chrono::days{97}, r, 30));
  CHECK_FALSE(label_week(kDay0 + std::chrono::days{101}, r, 30));
  CHECK(label_week(kDay0 + std::chrono::days{64}, r, 30));
  CHECK_FALSE(label_week(kDay0 + std::chrono::days{63}, r, 30));

  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<long> rel;
    for (std::uint64_t k = 0; k <= rng.below(3); ++k) rel.push_back(static_cast<long>(rng.below(200)));
    const long start = static_cast<long>(rng.below(220));
    const int h1 = static_cast<int>(1 + rng.below(60));
    const int h2 = h1 + static_cast<int>(rng.below(30));
    const auto d = dates_of(rel);
    const Date s = kDay0 + std::chrono::days{start};
    CHECK(label_week(s, d, h1) == oracle_label(start, rel, h1));
    if (label_week(s, d, h1)) CHECK(label_week(s, d, h2));
  }
}

TEST_CASE("window counts") {
  const WindowConfig cfg;
  auto count = [&](std::size_t n) {
    const std::vector<PatientDays> p{synthetic_days(n)};
    const std::vector<std::vector<Date>> rel(1);
    return make_windows(p, rel, cfg).windows;
  };
  CHECK(count(35).size() == 1);
  CHECK(count(34).empty());
  const auto w = count(42);
  REQUIRE(w.size() == 2);
  CHECK(w[0].first_day == 0);
  CHECK(w[1].first_day == 7);
  CHECK(w[1].target_week_start == kDay0 + std::chrono::days{35});
  CHECK(w[0].length == 28);
}

TEST_CASE("low-coverage windows are dropped and counted") {
  WindowConfig cfg;
  const std::vector<std::vector<Date>> rel(1);
  // Every other day masked: 14 of 28 days is exactly at the limit and kept.
  const std::vector<PatientDays> half{synthetic_days(35, 2)};
  CHECK(make_windows(half, rel, cfg).windows.size() == 1);
  const std::vector<PatientDays> most{synthetic_days(35, 1)};
  const auto ws = make_windows(most, rel, cfg);
  CHECK(ws.windows.empty());
  CHECK(ws.dropped_low_coverage == 1);
}

TEST_CASE("window structure and labels match a day-by-day oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 35 + rng.below(200);
    const long r = static_cast<long>(rng.below(n));
    const std::vector<PatientDays> p{synthetic_days(n)};
    const std::vector<std::vector<Date>> rel{dates_of({r})};
    const auto ws = make_windows(p, rel, WindowConfig{}).windows;
    std::size_t expected_windows = 0, expected_pos = 0;
    for (long s = 0; s + 35 <= static_cast<long>(n); s += 7) {
      ++expected_windows;
      expected_pos += oracle_label(s + 28, {r}, 30) ? 1 : 0;
    }
    CHECK(ws.size() == expected_windows);
    std::size_t pos = 0;
    for (const auto& w : ws) {
      pos += static_cast<std::size_t>(w.label);
      CHECK(w.length == 28);
      for (std::size_t d = 1; d < w.length; ++d) {
        CHECK(p[0].days[w.first_day + d].date - p[0].days[w.first_day + d - 1].date == std::chrono::days{1});
      }
      CHECK(p[0].days[w.first_day + w.length - 1].date < w.target_week_start);
      CHECK(w.target_week_start == w.window_start + std::chrono::days{28});
    }
    CHECK(pos == expected_pos);
  }
}

TEST_CASE("window input slices columns") {
  const auto p = synthetic_days(42);
  const std::vector<PatientDays> all{p};
  const auto w = make_windows(all, std::vector<std::vector<Date>>(1), WindowConfig{}).windows.at(1);
  std::vector<std::size_t> dims{day_index(3, Modality::volume), day_index(20, Modality::acc)};
  const auto m = window_input(p, w, dims);
  CHECK(m.rows == 28);
  CHECK(m.cols == 2);
  CHECK(m(0, 0) == 7.0);
  CHECK(m(27, 1) == 34.0);
  const auto mean = window_time_mean(p, w, dims);
  CHECK(mean[0] == doctest::Approx(20.5));
  CHECK(modality_dims({Modality::light}).size() == 24);
  CHECK(modality_dims({Modality::light})[1] == 6);
}

TEST_CASE("pipeline is deterministic") {
  synth::CohortSpec spec;
  spec.n_patients = 5;
  spec.days_per_patient = 90;
  spec.seed = 8;
  auto run = [&] {
    const auto csv = synth::generate_cohort(spec);
    std::istringstream p(csv.patients), s(csv.sensing), r(csv.relapses);
    const auto c = ingest_cohort(p, s, r);
    const auto days = build_day_vectors(c);
    std::vector<PatientDays> imputed;
    for (const auto& d : days) imputed.push_back(impute_missing(d, reference_stats(days)));
    return std::make_pair(imputed, make_windows(imputed, c, WindowConfig{}).windows);
  };
  const auto a = run(), b = run();
  REQUIRE(a.second.size() == b.second.size());
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    CHECK(a.second[i].first_day == b.second[i].first_day);
    CHECK(a.second[i].label == b.second[i].label);
  }
  for (std::size_t i = 0; i < a.first.size(); ++i)
    for (std::size_t d = 0; d < a.first[i].days.size(); ++d) CHECK(a.first[i].days[d].values == b.first[i].days[d].values);
}
