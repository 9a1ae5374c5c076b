#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "survivalkit/coxph.hpp"
#include "survivalkit/dataset.hpp"
#include "survivalkit/errors.hpp"
#include "survivalkit/nonparam.hpp"

namespace survivalkit {

enum class ResidualKind { Schoenfeld, ScaledSchoenfeld, Martingale, Deviance, CoxSnell };

inline std::string to_string(ResidualKind k) {
  switch (k) {
    case ResidualKind::Schoenfeld: return "schoenfeld";
    case ResidualKind::ScaledSchoenfeld: return "scaled_schoenfeld";
    case ResidualKind::Martingale: return "martingale";
    case ResidualKind::Deviance: return "deviance";
    default: return "coxsnell";
  }
}

// Residual values keyed by kind: Schoenfeld kinds carry one row per event
// (columns follow the design); the subject-level kinds fill `values`.
struct ResidualSet {
  ResidualKind kind = ResidualKind::Martingale;
  std::vector<double> times;
  std::vector<std::vector<double>> matrix;  // Schoenfeld kinds
  std::vector<std::string> column_names;
  std::vector<double> values;  // subject-level kinds
  std::vector<std::string> ids;
  std::vector<bool> events;
};

enum class TimeTransform { KM, Rank, Identity };

inline std::string to_string(TimeTransform t) {
  switch (t) {
    case TimeTransform::KM: return "km";
    case TimeTransform::Rank: return "rank";
    default: return "identity";
  }
}

struct PHTestTerm {
  std::string term;
  double statistic = 0.0;
  double p_value = 1.0;
};

struct PHTestReport {
  std::vector<PHTestTerm> terms;
  TestResult global;
  TimeTransform transform = TimeTransform::KM;
};

namespace detail {

struct EventResiduals {
  std::vector<double> times;                // one per event, ascending
  std::vector<std::vector<double>> values;  // row per event, col per design column
};

// Unscaled Schoenfeld residuals: event covariate minus the risk-set weighted
// mean, with the Efron correction distributing tied events over the
// downweighted pseudo risk sets of the fitted tie method.
inline EventResiduals schoenfeld_unscaled(const CoxModel& model, const Cohort& cohort) {
  DesignMatrix design = build_design(cohort, model.formula, &model.codings);
  const std::size_t n = design.n_rows;
  const std::size_t p = design.values.size();
  std::vector<double> times(n);
  std::vector<bool> events(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = cohort.records[i].survival_months;
    events[i] = cohort.records[i].event;
  }
  std::vector<double> eta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p; ++c) eta[i] += model.coef[c] * design.centered(i, c);
  }
  const auto ord = cox_ordering(times);
  const std::size_t n_groups = ord.group_time.size();

  // Risk-set accumulators from the top of the time axis down.
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0);
  struct GroupRow {
    double time;
    std::vector<std::size_t> event_rows;
    std::vector<double> xbar;  // averaged weighted mean for this tied group
  };
  std::vector<GroupRow> groups;
  for (std::size_t g = n_groups; g-- > 0;) {
    double tied_s0 = 0.0;
    std::vector<double> tied_s1(p, 0.0);
    GroupRow row;
    row.time = ord.group_time[g];
    for (std::size_t k = ord.group_start[g]; k < ord.group_start[g + 1]; ++k) {
      const std::size_t i = ord.order[k];
      const double w = std::exp(eta[i]);
      s0 += w;
      for (std::size_t c = 0; c < p; ++c) s1[c] += w * design.centered(i, c);
      if (events[i]) {
        row.event_rows.push_back(i);
        tied_s0 += w;
        for (std::size_t c = 0; c < p; ++c) tied_s1[c] += w * design.centered(i, c);
      }
    }
    const std::size_t d = row.event_rows.size();
    if (d == 0) continue;
    row.xbar.assign(p, 0.0);
    const std::size_t steps = model.tie_method == TieMethod::Efron ? d : 1;
    for (std::size_t l = 0; l < steps; ++l) {
      const double f = model.tie_method == TieMethod::Efron
                           ? static_cast<double>(l) / static_cast<double>(d)
                           : 0.0;
      const double z0 = s0 - f * tied_s0;
      for (std::size_t c = 0; c < p; ++c) {
        row.xbar[c] += (s1[c] - f * tied_s1[c]) / z0 / static_cast<double>(steps);
      }
    }
    groups.push_back(std::move(row));
  }
  std::reverse(groups.begin(), groups.end());  // ascending time

  EventResiduals out;
  for (const auto& g : groups) {
    for (std::size_t i : g.event_rows) {
      std::vector<double> r(p);
      for (std::size_t c = 0; c < p; ++c) r[c] = design.centered(i, c) - g.xbar[c];
      out.times.push_back(g.time);
      out.values.push_back(std::move(r));
    }
  }
  return out;
}

// Cox-Snell residual H0(t_i) exp(eta_i), computed in centered space where it
// is invariant.
inline std::vector<double> cox_snell_values(const CoxModel& model, const Cohort& cohort) {
  DesignMatrix design = build_design(cohort, model.formula, &model.codings);
  const std::size_t n = design.n_rows;
  const std::size_t p = design.values.size();
  std::vector<double> times(n);
  std::vector<bool> events(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = cohort.records[i].survival_months;
    events[i] = cohort.records[i].event;
  }
  std::vector<double> eta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p; ++c) eta[i] += model.coef[c] * design.centered(i, c);
  }
  const auto ord = cox_ordering(times);
  const std::size_t n_groups = ord.group_time.size();
  std::vector<double> risk_sum(n_groups, 0.0);
  std::vector<std::size_t> event_count(n_groups, 0);
  double acc = 0.0;
  for (std::size_t g = n_groups; g-- > 0;) {
    for (std::size_t k = ord.group_start[g]; k < ord.group_start[g + 1]; ++k) {
      const std::size_t i = ord.order[k];
      acc += std::exp(eta[i]);
      if (events[i]) ++event_count[g];
    }
    risk_sum[g] = acc;
  }
  std::vector<double> cumhaz(n_groups, 0.0);
  double h = 0.0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (event_count[g] > 0) h += static_cast<double>(event_count[g]) / risk_sum[g];
    cumhaz[g] = h;
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (std::size_t k = ord.group_start[g]; k < ord.group_start[g + 1]; ++k) {
      const std::size_t i = ord.order[k];
      out[i] = cumhaz[g] * std::exp(eta[i]);
    }
  }
  return out;
}

}  // namespace detail

inline ResidualSet schoenfeld_residuals(const CoxModel& model, const Cohort& cohort,
                                        bool scaled = false) {
  const std::size_t p = model.coef.size();
  if (model.n_events < p + 2) {
    throw SampleSizeError("schoenfeld_residuals: need at least p + 2 events");
  }
  auto ev = detail::schoenfeld_unscaled(model, cohort);
  ResidualSet rs;
  rs.kind = scaled ? ResidualKind::ScaledSchoenfeld : ResidualKind::Schoenfeld;
  rs.times = std::move(ev.times);
  for (const auto& col : model.columns) rs.column_names.push_back(col.name);
  if (!scaled) {
    rs.matrix = std::move(ev.values);
    return rs;
  }
  // Grambsch-Therneau scaling: d * V * r_k + beta-hat.
  const double d = static_cast<double>(model.n_events);
  rs.matrix.reserve(ev.values.size());
  for (const auto& r : ev.values) {
    const auto vr = detail::mat_vec(model.covariance, r);
    std::vector<double> row(p);
    for (std::size_t c = 0; c < p; ++c) row[c] = d * vr[c] + model.coef[c];
    rs.matrix.push_back(std::move(row));
  }
  return rs;
}

// Score-type test for proportional hazards: linear association between the
// scaled Schoenfeld residuals and a transform of the event-time axis.
inline PHTestReport ph_test(const CoxModel& model, const Cohort& cohort,
                            TimeTransform transform = TimeTransform::KM) {
  const std::size_t p = model.coef.size();
  auto ev = detail::schoenfeld_unscaled(model, cohort);
  const std::size_t m = ev.times.size();
  if (m < p + 2) throw SampleSizeError("ph_test: too few events");

  std::vector<double> g(m, 0.0);
  switch (transform) {
    case TimeTransform::KM: {
      const auto km = km_fit(cohort);
      for (std::size_t k = 0; k < m; ++k) g[k] = 1.0 - km_survival_before(km, ev.times[k]);
      break;
    }
    case TimeTransform::Rank: {
      g = midranks(ev.times);
      break;
    }
    case TimeTransform::Identity:
      g = ev.times;
      break;
  }
  const auto [mn, mx] = std::minmax_element(g.begin(), g.end());
  if (*mn == *mx) throw NumericError("ph_test: constant time transform");
  const double mean_g = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(m);
  double sum_g2 = 0.0;
  for (double& v : g) {
    v -= mean_g;
    sum_g2 += v * v;
  }

  std::vector<double> u(p, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t c = 0; c < p; ++c) u[c] += g[k] * ev.values[k][c];
  }
  const auto vu = detail::mat_vec(model.covariance, u);
  const double d = static_cast<double>(model.n_events);

  PHTestReport report;
  report.transform = transform;
  for (std::size_t c = 0; c < p; ++c) {
    PHTestTerm t;
    t.term = model.columns[c].name;
    const double denom = model.covariance(c, c) * sum_g2;
    t.statistic = denom > 0.0 ? d * vu[c] * vu[c] / denom : 0.0;
    t.p_value = chisq_sf(t.statistic, 1);
    report.terms.push_back(t);
  }
  double uvu = 0.0;
  for (std::size_t c = 0; c < p; ++c) uvu += u[c] * vu[c];
  report.global.statistic = d * uvu / sum_g2;
  report.global.df = static_cast<int>(p);
  report.global.p_value = chisq_sf(report.global.statistic, report.global.df);
  return report;
}

inline ResidualSet martingale_residuals(const CoxModel& model, const Cohort& cohort) {
  const auto cs = detail::cox_snell_values(model, cohort);
  ResidualSet rs;
  rs.kind = ResidualKind::Martingale;
  rs.times.reserve(cohort.size());
  rs.values.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = cohort.records[i];
    rs.times.push_back(r.survival_months);
    rs.values.push_back((r.event ? 1.0 : 0.0) - cs[i]);
    rs.ids.push_back(r.id);
    rs.events.push_back(r.event);
  }
  return rs;
}

inline ResidualSet deviance_residuals(const CoxModel& model, const Cohort& cohort) {
  auto rs = martingale_residuals(model, cohort);
  rs.kind = ResidualKind::Deviance;
  for (std::size_t i = 0; i < rs.values.size(); ++i) {
    const double m = rs.values[i];
    const double delta = rs.events[i] ? 1.0 : 0.0;
    double inner = -m;
    if (delta > 0.0) {
      const double arg = delta - m;  // the Cox-Snell residual, > 0 for events
      inner -= std::log(arg);        // delta * ln(delta - m) with delta = 1
    }
    const double mag = std::sqrt(std::max(0.0, 2.0 * inner));
    rs.values[i] = (m >= 0.0 ? 1.0 : -1.0) * mag;
    if (m == 0.0) rs.values[i] = 0.0;
  }
  return rs;
}

struct CoxSnellCheck {
  ResidualSet residuals;
  // Nelson-Aalen cumulative hazard of the residuals (censored residuals
  // leave the risk set without an event), plus the least-squares slope
  // through the origin; a well-specified model targets slope 1.
  std::vector<double> na_times;
  std::vector<double> na_cumhaz;
  double origin_slope = 0.0;
};

inline CoxSnellCheck coxsnell_residuals(const CoxModel& model, const Cohort& cohort) {
  const auto cs = detail::cox_snell_values(model, cohort);
  CoxSnellCheck check;
  check.residuals.kind = ResidualKind::CoxSnell;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    check.residuals.times.push_back(cohort.records[i].survival_months);
    check.residuals.values.push_back(cs[i]);
    check.residuals.ids.push_back(cohort.records[i].id);
    check.residuals.events.push_back(cohort.records[i].event);
  }
  // Nelson-Aalen over the residuals as pseudo survival times.
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cs[a] < cs[b]; });
  std::size_t at_risk = cs.size();
  double h = 0.0;
  double sum_rh = 0.0;
  double sum_rr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t d = 0;
    while (j < order.size() && cs[order[j]] == cs[order[i]]) {
      if (cohort.records[order[j]].event) ++d;
      ++j;
    }
    if (d > 0) {
      h += static_cast<double>(d) / static_cast<double>(at_risk);
      const double r = cs[order[i]];
      check.na_times.push_back(r);
      check.na_cumhaz.push_back(h);
      sum_rh += r * h;
      sum_rr += r * r;
    }
    at_risk -= j - i;
    i = j;
  }
  check.origin_slope = sum_rr > 0.0 ? sum_rh / sum_rr : 0.0;
  return check;
}

// Locally weighted linear smoother (tricube weights, no robustness passes).
// Returns fitted values aligned with x; span is the fraction of points in
// each local window.
inline std::vector<double> lowess_fit(const std::vector<double>& x, const std::vector<double>& y,
                                      double span = 2.0 / 3.0) {
  const std::size_t n = x.size();
  if (y.size() != n) throw std::domain_error("lowess_fit: size mismatch");
  if (n == 0) return {};
  const std::size_t q =
      std::min(n, std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(span * n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> fitted(n, 0.0);
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    // Window of the q nearest neighbours along the sorted axis.
    std::size_t lo = oi >= q ? oi - q + 1 : 0;
    std::size_t hi = std::min(n - 1, lo + q - 1);
    while (hi < n - 1 && lo > 0 &&
           x[order[hi]] - x[i] < x[i] - x[order[lo]]) {
      // shift window right when the left edge is farther than the right
      ++lo;
      ++hi;
    }
    lo = hi >= q - 1 ? hi - (q - 1) : 0;
    double dmax = 1e-300;
    for (std::size_t k = lo; k <= hi; ++k) {
      dmax = std::max(dmax, std::abs(x[order[k]] - x[i]));
    }
    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      const double dist = std::abs(x[order[k]] - x[i]) / dmax;
      const double t = 1.0 - dist * dist * dist;
      const double w = t * t * t;
      const double xv = x[order[k]];
      const double yv = y[order[k]];
      sw += w;
      swx += w * xv;
      swy += w * yv;
      swxx += w * xv * xv;
      swxy += w * xv * yv;
    }
    const double det = sw * swxx - swx * swx;
    if (std::abs(det) > 1e-12 * std::max(1.0, sw * swxx)) {
      const double slope = (sw * swxy - swx * swy) / det;
      const double intercept = (swy - slope * swx) / sw;
      fitted[i] = intercept + slope * x[i];
    } else {
      fitted[i] = sw > 0.0 ? swy / sw : 0.0;
    }
  }
  return fitted;
}

// Smoother-ready export for the functional-form check: (covariate value,
// martingale residual, lowess trend) per subject, sorted by covariate.
struct MartingaleTrend {
  std::string variable;
  std::vector<double> x;
  std::vector<double> residual;
  std::vector<double> smooth;
};

inline MartingaleTrend martingale_trend(const CoxModel& model, const Cohort& cohort,
                                        const std::string& variable) {
  const std::string var = detail::canonical_name(variable);
  if (!detail::is_numeric_variable(var)) {
    throw NameError("martingale_trend: not a numeric variable: " + variable);
  }
  const auto rs = martingale_residuals(model, cohort);
  MartingaleTrend trend;
  trend.variable = var;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto v = detail::numeric_value(cohort.records[i], var);
    if (v) pts.emplace_back(*v, rs.values[i]);
  }
  std::sort(pts.begin(), pts.end());
  for (const auto& [xv, rv] : pts) {
    trend.x.push_back(xv);
    trend.residual.push_back(rv);
  }
  trend.smooth = lowess_fit(trend.x, trend.residual);
  return trend;
}

}  // namespace survivalkit
