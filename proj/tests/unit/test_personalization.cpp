#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "relapse/errors.hpp"
#include "relapse/personalization/similarity.hpp"
#include "relapse/personalization/subsets.hpp"
#include "relapse/rng.hpp"

using namespace relapse;
using namespace relapse::personalization;
using data::ObservationWindow;
using data::PatientProfile;

namespace {

PatientProfile profile(std::string id, double age, double bprs = 30, double sfs = 110, double cdss = 3,
                       double gpts = 60) {
  return PatientProfile{std::move(id), age, bprs, sfs, cdss, gpts};
}

std::string pid(std::size_t i) { return std::string("P") + (i < 10 ? "0" : "") + std::to_string(i); }

struct RandomCohort {
  std::vector<PatientProfile> profiles;
  std::vector<ObservationWindow> windows;  // all patients
};

RandomCohort random_cohort(Rng& rng, std::size_t n) {
  RandomCohort c;
  for (std::size_t i = 0; i < n; ++i) {
    c.profiles.push_back(profile(pid(i), static_cast<double>(18 + rng.below(50)), static_cast<double>(rng.below(60)),
                                 static_cast<double>(60 + rng.below(100)), static_cast<double>(rng.below(10)),
                                 static_cast<double>(30 + rng.below(60))));
    const std::size_t pos = rng.bernoulli(0.4) ? 1 + rng.below(4) : 0;
    const std::size_t neg = rng.below(9);
    for (std::size_t k = 0; k < pos + neg; ++k) {
      ObservationWindow w;
      w.patient_id = pid(i);
      w.patient = i;
      w.first_day = 7 * k;
      w.label = k < pos ? 1 : 0;
      c.windows.push_back(w);
    }
  }
  return c;
}

std::vector<ObservationWindow> without(const std::vector<ObservationWindow>& all, const std::string& id) {
  std::vector<ObservationWindow> out;
  for (const auto& w : all)
    if (w.patient_id != id) out.push_back(w);
  return out;
}

// Independent selection sort over (distance, id).
std::vector<std::string> oracle_order(std::vector<std::pair<double, std::string>> items) {
  std::vector<std::string> out;
  while (!items.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (items[i].first < items[best].first ||
          (items[i].first == items[best].first && items[i].second < items[best].second)) {
        best = i;
      }
    }
    out.push_back(items[best].second);
    items.erase(items.begin() + static_cast<long>(best));
  }
  return out;
}

void check_subset(const TrainingSubset& s, std::span<const ObservationWindow> training, const SimilarityRanking* ranking,
                  const std::string& test_id) {
  CHECK(s.balanced());
  std::size_t positives = 0;
  for (const auto& w : training) positives += static_cast<std::size_t>(w.label);
  CHECK(s.relapse.size() == positives);
  std::set<std::size_t> seen;
  std::set<std::string> donors;
  for (std::size_t i : s.all()) {
    CHECK(seen.insert(i).second);
    CHECK(training[i].patient_id != test_id);
  }
  for (std::size_t i : s.relapse) CHECK(training[i].label == 1);
  for (std::size_t i : s.nonrelapse) {
    CHECK(training[i].label == 0);
    donors.insert(training[i].patient_id);
  }
  CHECK(std::vector<std::string>(donors.begin(), donors.end()) == s.donor_patients);
  if (ranking == nullptr) return;
  // The pool is the shortest ranking run that covers N_rel non-relapse windows.
  const std::set<std::string> pool(s.pool_patients.begin(), s.pool_patients.end());
  for (const auto& d : s.donor_patients) CHECK(pool.count(d) == 1);
  std::map<std::string, std::size_t> neg;
  for (const auto& w : training)
    if (w.label == 0) ++neg[w.patient_id];
  std::size_t covered = 0;
  for (std::size_t k = 0; k + 1 < s.pool_patients.size(); ++k) covered += neg[s.pool_patients[k]];
  CHECK(covered < s.relapse.size());
  CHECK(covered + neg[s.pool_patients.back()] >= s.relapse.size());
}

}  // namespace

TEST_CASE("metric distances") {
  const auto a = profile("A", 30), b = profile("B", 30), c = profile("C", 25), d = profile("D", 40, 30, 95);
  CHECK(metric_distance(a, b, Metric::age) == 0.0);
  CHECK(metric_distance(c, d, Metric::age) == 15.0);
  CHECK(metric_distance(a, d, Metric::sfs) == 15.0);
  auto missing = a;
  missing.cdss.reset();
  CHECK_THROWS_AS(metric_distance(missing, b, Metric::cdss), DataError);
  CHECK(parse_metric("gpts") == Metric::gpts);
  CHECK_THROWS_AS(parse_metric("height"), UsageError);
}

TEST_CASE("combined metric") {
  const std::vector<PatientProfile> cohort{profile("A", 20, 10, 50, 0, 30), profile("B", 60, 50, 150, 8, 90),
                                           profile("C", 40, 10, 50, 0, 30)};
  CHECK(combined_metric(cohort[0], cohort) == 0.0);
  CHECK(combined_metric(cohort[1], cohort) == 1.0);
  CHECK(combined_metric(cohort[2], cohort) == doctest::Approx(0.1).epsilon(1e-15));

  const std::vector<PatientProfile> flat{profile("A", 20), profile("B", 60)};
  CHECK(combined_metric(flat[0], flat) == doctest::Approx(0.4));  // age 0, four constant metrics at 0.5

  SUBCASE("affine rescaling of a column leaves the combined metric unchanged") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      auto c = random_cohort(rng, 8).profiles;
      auto scaled = c;
      for (auto& p : scaled) p.bprs = *p.bprs * 10.0 + 3.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(combined_metric(c[i], c) == doctest::Approx(combined_metric(scaled[i], scaled)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("ranking") {
  const auto t = profile("T", 25);
  const std::vector<PatientProfile> cands{profile("C", 40), profile("B", 30), profile("A", 20)};
  const auto r = rank_patients(t, cands, Metric::age);
  REQUIRE(r.ranked.size() == 3);
  CHECK(r.ranked[0].patient_id == "A");
  CHECK(r.ranked[1].patient_id == "B");
  CHECK(r.ranked[2].patient_id == "C");
  CHECK(r.ranked[2].distance == 15.0);
  CHECK(r.distance_of("B") == 5.0);

  const std::vector<PatientProfile> one{profile("Z", 70)};
  CHECK(rank_patients(t, one, Metric::age).ranked[0].patient_id == "Z");
  CHECK_THROWS(rank_patients(t, std::span<const PatientProfile>{}, Metric::age));
}

TEST_CASE("ranking matches a brute-force oracle on 100 random cohorts") {
  Rng rng(100);
  const Metric metrics[] = {Metric::age, Metric::bprs, Metric::sfs, Metric::cdss, Metric::gpts, Metric::combined};
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_cohort(rng, 3 + rng.below(15)).profiles;
    const Metric m = metrics[rng.below(6)];
    const auto& test = c[0];
    std::vector<PatientProfile> cands(c.begin() + 1, c.end());
    std::vector<std::pair<double, std::string>> items;
    for (const auto& p : cands) {
      double want;
      if (m == Metric::combined) {
        double tsum = 0.0, psum = 0.0;
        for (Metric k : {Metric::age, Metric::bprs, Metric::sfs, Metric::cdss, Metric::gpts}) {
          double lo = 1e300, hi = -1e300;
          for (const auto& q : c) {
            lo = std::min(lo, metric_value(q, k));
            hi = std::max(hi, metric_value(q, k));
          }
          tsum += hi == lo ? 0.5 : (metric_value(test, k) - lo) / (hi - lo);
          psum += hi == lo ? 0.5 : (metric_value(p, k) - lo) / (hi - lo);
        }
        want = std::abs(tsum - psum) / 5.0;
      } else {
        want = std::abs(metric_value(test, m) - metric_value(p, m));
      }
      const double got = metric_distance(test, p, m, c);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      items.emplace_back(got, p.patient_id);
    }
    const auto r = rank_patients(test, cands, m);
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < r.ranked.size(); ++k) {
      ids.push_back(r.ranked[k].patient_id);
      if (k > 0) CHECK(r.ranked[k - 1].distance <= r.ranked[k].distance);
      CHECK(r.ranked[k].patient_id != test.patient_id);
    }
    CHECK(ids == oracle_order(items));
  }
}

TEST_CASE("subset construction examples") {
  // Test patient T; donors ranked A (nearest) .. D.
  std::vector<ObservationWindow> training;
  auto add = [&](const std::string& id, int pos, int neg) {
    for (int k = 0; k < pos + neg; ++k) {
      ObservationWindow w;
      w.patient_id = id;
      w.label = k < pos ? 1 : 0;
      training.push_back(w);
    }
  };
  add("A", 0, 6);
  add("B", 3, 2);
  add("C", 2, 9);
  add("D", 0, 4);
  SimilarityRanking ranking{"T", Metric::age, {{"A", 1}, {"B", 2}, {"C", 3}, {"D", 4}}};

  const auto s = build_personalized_subset(training, ranking, 7);
  CHECK(s.relapse.size() == 5);
  CHECK(s.nonrelapse.size() == 5);
  CHECK(s.donor_patients == std::vector<std::string>{"A"});
  check_subset(s, training, &ranking, "T");
  const auto again = build_personalized_subset(training, ranking, 7);
  CHECK(again.nonrelapse == s.nonrelapse);

  const auto closest = distance_stratified_subset(training, ranking, Stratum::closest, 7);
  CHECK(closest.nonrelapse == s.nonrelapse);

  const auto q1 = distance_stratified_subset(training, ranking, Stratum::first_quartile, 7);
  CHECK(q1.pool_patients == std::vector<std::string>{"B", "C"});
  CHECK_THROWS_AS(distance_stratified_subset(training, SimilarityRanking{"T", Metric::age, {{"D", 1}, {"B", 2}}},
                                             Stratum::median, 1),
                  InsufficientDonorsError);

  const auto r1 = build_random_subset(training, 1);
  check_subset(r1, training, nullptr, "T");
  CHECK(r1.relapse == s.relapse);

  std::vector<ObservationWindow> negatives_only(training.begin(), training.begin() + 6);
  CHECK_THROWS_WITH_AS(build_personalized_subset(negatives_only, ranking, 1), "no positive instances",
                       NoPositivesError);

  auto leaked = training;
  leaked[0].patient_id = "T";
  CHECK_THROWS_AS(build_personalized_subset(leaked, ranking, 1), LeakageError);

  const auto full = build_full_set(training);
  CHECK(full.relapse.size() == 5);
  CHECK(full.nonrelapse.size() == 21);
}

TEST_CASE("stratum start indices") {
  CHECK(stratum_start(Stratum::median, 8) == 4);
  CHECK(stratum_start(Stratum::first_quartile, 4) == 1);
  CHECK(stratum_start(Stratum::closest, 4) == 0);

  std::vector<ObservationWindow> training;
  for (std::size_t i = 0; i < 8; ++i) {
    for (int k = 0; k < 3; ++k) {
      ObservationWindow w;
      w.patient_id = pid(i);
      w.label = (i == 0 && k == 0) ? 1 : 0;
      training.push_back(w);
    }
  }
  SimilarityRanking ranking{"T", Metric::age, {}};
  for (std::size_t i = 0; i < 8; ++i) ranking.ranked.push_back({pid(i), static_cast<double>(i)});
  const auto s = distance_stratified_subset(training, ranking, Stratum::median, 3);
  for (const auto& d : s.donor_patients) CHECK(ranking.distance_of(d) >= 4.0);
}

TEST_CASE("subset invariants over random cohorts") {
  Rng rng(555);
  int built = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_cohort(rng, 4 + rng.below(20));
    const auto& test = c.profiles[rng.below(c.profiles.size())];
    std::vector<PatientProfile> cands;
    for (const auto& p : c.profiles)
      if (p.patient_id != test.patient_id) cands.push_back(p);
    const auto training = without(c.windows, test.patient_id);
    const auto ranking = rank_patients(test, cands, Metric::sfs);
    const std::uint64_t seed = rng.next();
    try {
      check_subset(build_personalized_subset(training, ranking, seed), training, &ranking, test.patient_id);
      check_subset(build_random_subset(training, seed), training, nullptr, test.patient_id);
      ++built;
    } catch (const NoPositivesError&) {
    } catch (const InsufficientDonorsError&) {
    }
    for (auto st : {Stratum::first_quartile, Stratum::median}) {
      try {
        check_subset(distance_stratified_subset(training, ranking, st, seed), training, &ranking, test.patient_id);
      } catch (const NoPositivesError&) {
      } catch (const InsufficientDonorsError&) {
      }
    }
  }
  CHECK(built > 50);
}

TEST_CASE("random subsets vary donors while relapse windows stay fixed") {
  Rng rng(40);
  RandomCohort c;
  do c = random_cohort(rng, 40);
  while (std::none_of(c.windows.begin(), c.windows.end(), [](const auto& w) { return w.label == 1; }));
  std::set<std::string> donors;
  std::vector<std::size_t> first_relapse;
  std::set<std::vector<std::size_t>> negatives;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = build_random_subset(c.windows, seed);
    if (seed == 1) first_relapse = s.relapse;
    CHECK(s.relapse == first_relapse);
    negatives.insert(s.nonrelapse);
    donors.insert(s.donor_patients.begin(), s.donor_patients.end());
  }
  CHECK(donors.size() > 1);
  CHECK(negatives.size() > 1);
}

TEST_CASE("personalized donors are no farther than random donors") {
  Rng rng(71);
  for (int cohort = 0; cohort < 5; ++cohort) {
    RandomCohort c = random_cohort(rng, 10 + rng.below(20));
    const auto& test = c.profiles[0];
    const std::vector<PatientProfile> cands(c.profiles.begin() + 1, c.profiles.end());
    const auto training = without(c.windows, test.patient_id);
    if (std::none_of(training.begin(), training.end(), [](const auto& w) { return w.label == 1; })) continue;
    const auto ranking = rank_patients(test, cands, Metric::sfs);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto p = build_personalized_subset(training, ranking, seed);
      const auto r = build_random_subset(training, seed);
      CHECK(mean_donor_distance(p, ranking) <= mean_donor_distance(r, ranking));
    }
  }
}
