#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "support/simulate.hpp"
#include "survivalkit/core_math.hpp"
#include "survivalkit/nonparam.hpp"

using Catch::Matchers::WithinAbs;
namespace sk = survivalkit;

namespace {

sk::SurvivalRecord subject(const std::string& id, double time, bool event) {
  sk::SurvivalRecord r;
  r.id = id;
  r.age_at_implant = 65.0;
  r.gender = sk::Gender::Male;
  r.survival_months = time;
  r.event = event;
  r.initial_side = sk::ImplantSide::Left;
  r.n_revisions = 0;
  return r;
}

sk::Cohort cohort_from(const std::vector<std::pair<double, bool>>& obs,
                       const std::string& label = "test") {
  sk::Cohort c;
  c.label = label;
  int i = 0;
  for (const auto& [t, e] : obs) c.records.push_back(subject(label + std::to_string(++i), t, e));
  return c;
}

// Event stream with n_total subjects: the listed (time, deaths) plus filler
// events beyond the last listed time so risk counts match the source table.
sk::Cohort replay_stream(const std::vector<std::pair<double, int>>& stream, int n_total,
                         const std::string& label) {
  std::vector<std::pair<double, bool>> obs;
  double last = 0.0;
  for (const auto& [t, d] : stream) {
    for (int k = 0; k < d; ++k) obs.emplace_back(t, true);
    last = std::max(last, t);
  }
  int filler = n_total - static_cast<int>(obs.size());
  for (int k = 0; k < filler; ++k) obs.emplace_back(last + 10.0 + k, true);
  return cohort_from(obs, label);
}

// Independent log-rank oracle: direct accumulation of the hypergeometric
// moments over pooled event times, written from the definition.
double logrank_oracle(std::vector<double> a_times, std::vector<double> b_times) {
  std::vector<double> all = a_times;
  all.insert(all.end(), b_times.begin(), b_times.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  double oe = 0.0, var = 0.0;
  for (double t : all) {
    const auto at_risk = [&](const std::vector<double>& v) {
      return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x >= t; }));
    };
    const auto dying = [&](const std::vector<double>& v) {
      return static_cast<double>(std::count(v.begin(), v.end(), t));
    };
    const double na = at_risk(a_times), nb = at_risk(b_times);
    const double n = na + nb;
    const double d = dying(a_times) + dying(b_times);
    if (d == 0.0 || n <= 1.0) continue;
    oe += dying(a_times) - d * na / n;
    var += d * (n - d) * na * nb / (n * n * (n - 1.0));
  }
  return oe * oe / var;
}

}  // namespace

TEST_CASE("km_fit reproduces the male event-stream rows", "[nonparam][km]") {
  const auto male = replay_stream({{3, 1}, {4, 2}, {7, 1}}, 109, "m");
  const auto curve = sk::km_fit(male);
  REQUIRE(curve.n_start == 109);
  REQUIRE(curve.rows[0].time == 3.0);
  REQUIRE(curve.rows[0].n_risk == 109);
  REQUIRE_THAT(curve.rows[0].survival, WithinAbs(0.99083, 5e-4));
  REQUIRE_THAT(curve.rows[0].std_err, WithinAbs(0.00913, 5e-5));
  REQUIRE_THAT(curve.rows[0].ci_lower, WithinAbs(0.97309, 1e-3));
  REQUIRE_THAT(curve.rows[0].ci_upper, WithinAbs(1.0, 1e-12));  // log CI clipped at 1
  REQUIRE(curve.rows[1].time == 4.0);
  REQUIRE(curve.rows[1].n_risk == 108);
  REQUIRE(curve.rows[1].n_event == 2);  // tied deaths aggregate
  REQUIRE_THAT(curve.rows[1].survival, WithinAbs(0.97248, 5e-4));
  REQUIRE_THAT(curve.rows[2].survival, WithinAbs(0.96330, 5e-4));
}

TEST_CASE("km_fit handles censoring and degenerate cohorts", "[nonparam][km]") {
  SECTION("{2, 4, 4, 6+} hand product") {
    const auto c = cohort_from({{2, true}, {4, true}, {4, true}, {6, false}});
    const auto curve = sk::km_fit(c);
    REQUIRE(curve.rows.size() == 2);
    REQUIRE_THAT(curve.rows[0].survival, WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(curve.rows[1].survival, WithinAbs(0.25, 1e-12));
    REQUIRE(sk::km_median(curve).value() == 4.0);
  }

  SECTION("all-censored cohort keeps survival at 1 with no event rows") {
    const auto c = cohort_from({{2, false}, {5, false}, {9, false}});
    const auto curve = sk::km_fit(c);
    REQUIRE(curve.rows.empty());
    REQUIRE_FALSE(sk::km_median(curve).has_value());
  }

  SECTION("single event exhausts the risk set") {
    const auto curve = sk::km_fit(cohort_from({{5, true}}));
    REQUIRE(curve.rows.size() == 1);
    REQUIRE(curve.rows[0].survival == 0.0);
    REQUIRE(sk::km_median(curve).value() == 5.0);
  }

  SECTION("empty cohort and nonpositive times throw") {
    REQUIRE_THROWS_AS(sk::km_fit(sk::Cohort{}), std::domain_error);
    REQUIRE_THROWS_AS(sk::km_fit(cohort_from({{0.0, true}})), sk::RowError);
  }
}

TEST_CASE("km_fit equals 1 - ecdf without censoring", "[nonparam][km]") {
  std::mt19937_64 gen(2024);
  std::vector<std::pair<double, bool>> obs;
  for (int i = 0; i < 60; ++i) {
    obs.emplace_back(1.0 + std::floor(testsupport::uniform01(gen) * 30.0), true);
  }
  const auto cohort = cohort_from(obs);
  const auto curve = sk::km_fit(cohort);
  for (const auto& row : curve.rows) {
    const double above = static_cast<double>(
        std::count_if(obs.begin(), obs.end(), [&](const auto& o) { return o.first > row.time; }));
    REQUIRE_THAT(row.survival, WithinAbs(above / static_cast<double>(obs.size()), 1e-12));
  }
}

TEST_CASE("Greenwood standard error at a first single event", "[nonparam][km]") {
  const auto curve = sk::km_fit(cohort_from({{1, true}, {2, true}, {3, true}, {4, true},
                                             {5, true}, {6, true}, {7, true}, {8, true}}));
  const double n = 8.0;
  const double s = curve.rows[0].survival;
  REQUIRE_THAT(curve.rows[0].std_err, WithinAbs(s * std::sqrt(1.0 / (n * (n - 1.0))), 1e-14));
}

TEST_CASE("logrank_test matches the enumeration oracle", "[nonparam][logrank]") {
  SECTION("identical groups give statistic 0, p 1") {
    const auto a = cohort_from({{1, true}, {2, true}, {3, true}}, "a");
    const auto b = cohort_from({{1, true}, {2, true}, {3, true}}, "b");
    const auto res = sk::logrank_test(a, b);
    REQUIRE_THAT(res.statistic, WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(res.p_value, WithinAbs(1.0, 1e-12));
  }

  SECTION("interleaved events against the hand oracle") {
    const auto a = cohort_from({{1, true}, {3, true}, {5, true}}, "a");
    const auto b = cohort_from({{2, true}, {4, true}, {6, true}}, "b");
    const auto res = sk::logrank_test(a, b);
    const double oracle = logrank_oracle({1, 3, 5}, {2, 4, 6});
    REQUIRE_THAT(res.statistic, WithinAbs(oracle, 1e-12));
    REQUIRE_THAT(res.p_value, WithinAbs(sk::chisq_sf(oracle, 1).value(), 1e-12));

    SECTION("label swap leaves the statistic unchanged") {
      const auto swapped = sk::logrank_test(b, a);
      REQUIRE_THAT(swapped.statistic, WithinAbs(res.statistic, 1e-12));
    }

    SECTION("common time shift leaves the statistic unchanged") {
      const auto a2 = cohort_from({{11, true}, {13, true}, {15, true}}, "a");
      const auto b2 = cohort_from({{12, true}, {14, true}, {16, true}}, "b");
      REQUIRE_THAT(sk::logrank_test(a2, b2).statistic, WithinAbs(res.statistic, 1e-12));
    }
  }

  SECTION("random censored datasets match the oracle machinery") {
    std::mt19937_64 gen(55);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::pair<double, bool>> ao, bo;
      for (int i = 0; i < 25; ++i) {
        ao.emplace_back(1.0 + std::floor(testsupport::uniform01(gen) * 20.0), true);
        bo.emplace_back(1.0 + std::floor(testsupport::uniform01(gen) * 25.0), true);
      }
      std::vector<double> at, bt;
      for (auto& [t, e] : ao) at.push_back(t);
      for (auto& [t, e] : bo) bt.push_back(t);
      const auto res = sk::logrank_test(cohort_from(ao, "a"), cohort_from(bo, "b"));
      REQUIRE_THAT(res.statistic, WithinAbs(logrank_oracle(at, bt), 1e-10));
    }
  }

  SECTION("zero events is an undefined test") {
    const auto a = cohort_from({{1, false}}, "a");
    const auto b = cohort_from({{2, false}}, "b");
    REQUIRE_THROWS_AS(sk::logrank_test(a, b), sk::NumericError);
  }
}

namespace {

// Exact Mann-Whitney oracle: enumerate which pooled positions belong to A.
double mw_exact_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = sk::midranks(pooled);
  const std::size_t n = pooled.size();
  const std::size_t na = a.size();
  double w_obs = 0.0;
  for (std::size_t i = 0; i < na; ++i) w_obs += ranks[i];
  const double mu = static_cast<double>(na) * static_cast<double>(n + 1) / 2.0;
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(na), true);
  std::sort(mask.begin(), mask.end());
  std::size_t hits = 0, total = 0;
  do {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) w += ranks[i];
    }
    ++total;
    if (std::abs(w - mu) >= std::abs(w_obs - mu) - 1e-9) ++hits;
  } while (std::next_permutation(mask.begin(), mask.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("wilcoxon_test exact mode and variants", "[nonparam][wilcoxon]") {
  SECTION("A={1,2}, B={3,4} has exact two-sided p = 1/3") {
    const auto a = cohort_from({{1, true}, {2, true}}, "a");
    const auto b = cohort_from({{3, true}, {4, true}}, "b");
    const auto res = sk::wilcoxon_test(a, b);
    REQUIRE(res.exact);
    REQUIRE_THAT(res.p_value, WithinAbs(1.0 / 3.0, 1e-12));
  }

  SECTION("identical samples give p = 1") {
    const auto a = cohort_from({{1, true}, {2, true}, {3, true}}, "a");
    const auto res = sk::wilcoxon_test(a, a);
    REQUIRE_THAT(res.p_value, WithinAbs(1.0, 1e-12));
  }

  SECTION("exact mode equals the enumeration oracle for small datasets") {
    std::mt19937_64 gen(808);
    for (int rep = 0; rep < 15; ++rep) {
      const std::size_t na = 2 + gen() % 4;
      const std::size_t nb = 2 + gen() % 4;
      std::vector<double> av, bv;
      std::vector<std::pair<double, bool>> ao, bo;
      for (std::size_t i = 0; i < na; ++i) {
        av.push_back(1.0 + std::floor(testsupport::uniform01(gen) * 6.0));
        ao.emplace_back(av.back(), true);
      }
      for (std::size_t i = 0; i < nb; ++i) {
        bv.push_back(1.0 + std::floor(testsupport::uniform01(gen) * 6.0));
        bo.emplace_back(bv.back(), true);
      }
      const auto res = sk::wilcoxon_test(cohort_from(ao, "a"), cohort_from(bo, "b"));
      REQUIRE_THAT(res.p_value, WithinAbs(mw_exact_oracle(av, bv), 1e-12));
    }
  }

  SECTION("censored data rejects the MannWhitney variant") {
    const auto a = cohort_from({{1, true}, {2, false}}, "a");
    const auto b = cohort_from({{3, true}, {4, true}}, "b");
    REQUIRE_THROWS_AS(sk::wilcoxon_test(a, b, sk::WilcoxonVariant::MannWhitney), sk::InputError);
    const auto gehan = sk::wilcoxon_test(a, b, sk::WilcoxonVariant::Gehan);
    REQUIRE(gehan.method == sk::RankTestMethod::GehanWilcoxon);
    REQUIRE(gehan.p_value >= 0.0);
    REQUIRE(gehan.p_value <= 1.0);
  }

  SECTION("normal approximation path on larger samples") {
    std::mt19937_64 gen(313);
    std::vector<std::pair<double, bool>> ao, bo;
    for (int i = 0; i < 30; ++i) {
      ao.emplace_back(10.0 + 5.0 * testsupport::box_muller(gen), true);
      bo.emplace_back(12.0 + 5.0 * testsupport::box_muller(gen), true);
    }
    for (auto& [t, e] : ao) t = std::max(t, 0.5);
    for (auto& [t, e] : bo) t = std::max(t, 0.5);
    const auto res = sk::wilcoxon_test(cohort_from(ao, "a"), cohort_from(bo, "b"));
    REQUIRE_FALSE(res.exact);
    REQUIRE(res.p_value > 0.0);
    REQUIRE(res.p_value <= 1.0);
  }
}
