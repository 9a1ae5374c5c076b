#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "survivalkit/core_math.hpp"
#include "survivalkit/dataset.hpp"
#include "survivalkit/errors.hpp"

namespace survivalkit {

struct KMRow {
  double time = 0.0;
  std::size_t n_risk = 0;
  std::size_t n_event = 0;
  double survival = 1.0;
  double std_err = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 1.0;
};

// Product-limit estimate over the distinct event times, with Greenwood
// standard errors and log-scale confidence bands.
struct KMCurve {
  std::vector<KMRow> rows;
  std::size_t n_start = 0;
  double conf_level = 0.95;
};

enum class RankTestMethod { LogRank, WilcoxonRankSum, GehanWilcoxon };

struct RankTestResult {
  double statistic = 0.0;  // chi-square value; Mann-Whitney U for WilcoxonRankSum
  int df = 0;
  double p_value = 1.0;
  RankTestMethod method = RankTestMethod::LogRank;
  bool exact = false;  // true when the Mann-Whitney p came from enumeration
};

enum class WilcoxonVariant { MannWhitney, Gehan };

namespace detail {

struct TimePoint {
  double time;
  std::size_t events;
  std::size_t censored;
};

// Distinct times in increasing order with event/censor counts aggregated.
inline std::vector<TimePoint> aggregate_times(const Cohort& cohort) {
  std::map<double, TimePoint> agg;
  for (const auto& r : cohort.records) {
    if (!(r.survival_months > 0.0)) {
      throw RowError("nonpositive survival time for id '" + r.id + "'");
    }
    auto& tp = agg.try_emplace(r.survival_months, TimePoint{r.survival_months, 0, 0}).first->second;
    if (r.event) {
      ++tp.events;
    } else {
      ++tp.censored;
    }
  }
  std::vector<TimePoint> out;
  out.reserve(agg.size());
  for (const auto& [t, tp] : agg) out.push_back(tp);
  return out;
}

}  // namespace detail

inline KMCurve km_fit(const Cohort& cohort, double conf_level = 0.95) {
  if (cohort.empty()) throw std::domain_error("km_fit: empty cohort");
  if (!(conf_level > 0.0 && conf_level < 1.0)) {
    throw std::domain_error("km_fit: conf_level must lie in (0, 1)");
  }
  const auto timeline = detail::aggregate_times(cohort);
  const double z = normal_quantile(0.5 + 0.5 * conf_level);

  KMCurve curve;
  curve.n_start = cohort.size();
  curve.conf_level = conf_level;
  std::size_t at_risk = cohort.size();
  double survival = 1.0;
  double greenwood = 0.0;  // sum of d / (n (n - d))
  bool exhausted = false;
  for (const auto& tp : timeline) {
    if (tp.events > 0) {
      KMRow row;
      row.time = tp.time;
      row.n_risk = at_risk;
      row.n_event = tp.events;
      if (tp.events == at_risk) exhausted = true;
      if (exhausted) {
        survival = 0.0;
        row.survival = 0.0;
        row.std_err = 0.0;
        row.ci_lower = 0.0;
        row.ci_upper = 0.0;
      } else {
        survival *= 1.0 - static_cast<double>(tp.events) / static_cast<double>(at_risk);
        greenwood += static_cast<double>(tp.events) /
                     (static_cast<double>(at_risk) * static_cast<double>(at_risk - tp.events));
        row.survival = survival;
        row.std_err = survival * std::sqrt(greenwood);
        const double log_s = std::log(survival);
        const double half_width = z * std::sqrt(greenwood);
        row.ci_lower = std::max(0.0, std::exp(log_s - half_width));
        row.ci_upper = std::min(1.0, std::exp(log_s + half_width));
      }
      curve.rows.push_back(row);
    }
    at_risk -= tp.events + tp.censored;
  }
  return curve;
}

// First event time whose survival estimate is <= 0.5; empty when the curve
// never reaches it.
inline std::optional<double> km_median(const KMCurve& curve) {
  for (const auto& row : curve.rows) {
    if (row.survival <= 0.5) return row.time;
  }
  return std::nullopt;
}

// Survival value just before time t (left-continuous evaluation).
inline double km_survival_before(const KMCurve& curve, double t) {
  double s = 1.0;
  for (const auto& row : curve.rows) {
    if (row.time < t) {
      s = row.survival;
    } else {
      break;
    }
  }
  return s;
}

namespace detail {

// Shared machinery for the (weighted) log-rank family. weight_fn receives
// the pooled risk-set size at each event time.
template <typename WeightFn>
RankTestResult two_group_score_test(const Cohort& group_a, const Cohort& group_b,
                                    WeightFn weight_fn, RankTestMethod method) {
  if (group_a.empty() || group_b.empty()) {
    throw std::domain_error("rank test: both groups must be nonempty");
  }
  struct Obs {
    double time;
    bool event;
    bool in_a;
  };
  std::vector<Obs> obs;
  obs.reserve(group_a.size() + group_b.size());
  for (const auto& r : group_a.records) obs.push_back({r.survival_months, r.event, true});
  for (const auto& r : group_b.records) obs.push_back({r.survival_months, r.event, false});
  std::sort(obs.begin(), obs.end(), [](const Obs& x, const Obs& y) { return x.time < y.time; });

  const std::size_t n_obs = obs.size();
  std::size_t at_risk = n_obs;
  std::size_t at_risk_a = group_a.size();
  double sum_oe = 0.0;
  double sum_var = 0.0;
  bool any_event = false;
  std::size_t i = 0;
  while (i < n_obs) {
    std::size_t j = i;
    std::size_t d = 0;
    std::size_t d_a = 0;
    while (j < n_obs && obs[j].time == obs[i].time) {
      if (obs[j].event) {
        ++d;
        if (obs[j].in_a) ++d_a;
      }
      ++j;
    }
    if (d > 0) {
      any_event = true;
      const double n = static_cast<double>(at_risk);
      const double na = static_cast<double>(at_risk_a);
      const double nb = n - na;
      const double dd = static_cast<double>(d);
      const double w = weight_fn(at_risk);
      const double expected_a = dd * na / n;
      sum_oe += w * (static_cast<double>(d_a) - expected_a);
      if (at_risk > 1) {
        sum_var += w * w * dd * (n - dd) * na * nb / (n * n * (n - 1.0));
      }
    }
    for (std::size_t k = i; k < j; ++k) {
      if (obs[k].in_a) --at_risk_a;
      --at_risk;
    }
    i = j;
  }
  if (!any_event) throw NumericError("rank test undefined: no events in either group");

  RankTestResult res;
  res.method = method;
  res.df = 1;
  if (sum_var <= 0.0) {
    if (std::abs(sum_oe) > 1e-12) {
      throw NumericError("rank test undefined: zero variance with nonzero score");
    }
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.statistic = sum_oe * sum_oe / sum_var;
  res.p_value = chisq_sf(res.statistic, 1);
  return res;
}

// Exact two-sided Mann-Whitney p by enumerating all assignments of the
// pooled midranks to group A.
inline double mann_whitney_exact_p(const std::vector<double>& ranks, std::size_t n_a,
                                   double observed_w) {
  const std::size_t n = ranks.size();
  const double mu = static_cast<double>(n_a) * static_cast<double>(n + 1) / 2.0;
  const double target = std::abs(observed_w - mu) - 1e-9;
  std::size_t count = 0;
  std::size_t total = 0;
  std::vector<bool> select(n, false);
  std::fill(select.begin(), select.begin() + static_cast<std::ptrdiff_t>(n_a), true);
  std::sort(select.begin(), select.end());  // lexicographically first arrangement
  do {
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (select[k]) w += ranks[k];
    }
    ++total;
    if (std::abs(w - mu) >= target) ++count;
  } while (std::next_permutation(select.begin(), select.end()));
  return static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace detail

// Two-group log-rank test: chi-square on 1 df with hypergeometric moments
// accumulated over the pooled event times.
inline RankTestResult logrank_test(const Cohort& group_a, const Cohort& group_b) {
  return detail::two_group_score_test(
      group_a, group_b, [](std::size_t) { return 1.0; }, RankTestMethod::LogRank);
}

// Wilcoxon rank-sum comparison of survival times. MannWhitney requires fully
// observed groups (exact enumeration when n <= 20, tie- and continuity-
// corrected normal approximation otherwise); Gehan is the censoring-aware
// generalized Wilcoxon score test.
inline RankTestResult wilcoxon_test(const Cohort& group_a, const Cohort& group_b,
                                    WilcoxonVariant variant = WilcoxonVariant::MannWhitney) {
  if (variant == WilcoxonVariant::Gehan) {
    return detail::two_group_score_test(
        group_a, group_b, [](std::size_t n_risk) { return static_cast<double>(n_risk); },
        RankTestMethod::GehanWilcoxon);
  }
  if (group_a.empty() || group_b.empty()) {
    throw std::domain_error("wilcoxon_test: both groups must be nonempty");
  }
  for (const auto* g : {&group_a, &group_b}) {
    for (const auto& r : g->records) {
      if (!r.event) {
        throw InputError(
            "Mann-Whitney variant requires fully uncensored groups; use the Gehan variant");
      }
    }
  }
  std::vector<double> pooled;
  pooled.reserve(group_a.size() + group_b.size());
  for (const auto& r : group_a.records) pooled.push_back(r.survival_months);
  for (const auto& r : group_b.records) pooled.push_back(r.survival_months);
  const auto ranks = midranks(pooled);
  const std::size_t n_a = group_a.size();
  const std::size_t n = pooled.size();
  const std::size_t n_b = n - n_a;
  double w_a = 0.0;
  for (std::size_t i = 0; i < n_a; ++i) w_a += ranks[i];
  const double u = w_a - static_cast<double>(n_a) * static_cast<double>(n_a + 1) / 2.0;

  RankTestResult res;
  res.method = RankTestMethod::WilcoxonRankSum;
  res.statistic = u;
  res.df = 0;
  if (n <= 20) {
    res.exact = true;
    res.p_value = detail::mann_whitney_exact_p(ranks, n_a, w_a);
    return res;
  }
  // Normal approximation with tie correction and continuity correction.
  std::map<double, std::size_t> tie_counts;
  for (double v : pooled) ++tie_counts[v];
  double tie_sum = 0.0;
  for (const auto& [v, c] : tie_counts) {
    const double t = static_cast<double>(c);
    tie_sum += t * t * t - t;
  }
  const double na = static_cast<double>(n_a);
  const double nb = static_cast<double>(n_b);
  const double nn = static_cast<double>(n);
  const double var =
      na * nb / 12.0 * ((nn + 1.0) - tie_sum / (nn * (nn - 1.0)));
  const double mu = na * nb / 2.0;
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double zed = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  res.p_value = 2.0 * static_cast<double>(normal_cdf(-zed));
  if (res.p_value > 1.0) res.p_value = 1.0;
  return res;
}

}  // namespace survivalkit
