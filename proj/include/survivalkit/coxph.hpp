#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "survivalkit/core_math.hpp"
#include "survivalkit/dataset.hpp"
#include "survivalkit/errors.hpp"
#include "survivalkit/formula.hpp"
#include "survivalkit/linalg.hpp"

namespace survivalkit {

enum class TieMethod { Efron, Breslow };

inline std::string to_string(TieMethod t) {
  return t == TieMethod::Efron ? "efron" : "breslow";
}

struct PartialLikelihood {
  double value = 0.0;
  std::vector<double> gradient;
  Matrix hessian;  // second derivative (negative semidefinite)
};

struct TestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

struct GlobalTests {
  TestResult likelihood_ratio;
  TestResult wald;
  TestResult score;
};

// Fitted proportional-hazards model. Coefficients are on the original
// covariate scale; fitting happens on centered columns, which cancels in
// the partial likelihood.
struct CoxModel {
  ModelFormula formula;
  std::vector<DesignColumn> columns;
  std::vector<FactorCoding> codings;
  std::vector<double> column_means;
  std::vector<double> coef;
  Matrix covariance;
  double loglik_null = 0.0;
  double loglik_fit = 0.0;
  double score_statistic = 0.0;  // U(0)' I(0)^-1 U(0), frozen at fit time
  TieMethod tie_method = TieMethod::Efron;
  std::size_t n = 0;
  std::size_t n_events = 0;
  int iterations = 0;
  double max_gradient = 0.0;  // infinity norm of the score at the optimum
};

struct HazardRatio {
  std::string term;
  double coef = 0.0;
  double se_coef = 0.0;
  double hr = 1.0;
  double ci_lower = 1.0;
  double ci_upper = 1.0;
};

// Nondecreasing step function H0(t), zero before the first event time.
struct BaselineHazard {
  std::vector<double> times;
  std::vector<double> cumhaz;

  double at(double t) const {
    double h = 0.0;
    for (std::size_t i = 0; i < times.size() && times[i] <= t; ++i) h = cumhaz[i];
    return h;
  }
};

namespace detail {

// Subjects ordered by time ascending with tied events grouped; the risk set
// at an event time is everyone with time >= that value (censored subjects
// stay in the risk set at their own time).
struct CoxOrdering {
  std::vector<std::size_t> order;          // row indices sorted by time asc
  std::vector<std::size_t> group_start;    // offsets of distinct times
  std::vector<double> group_time;
};

inline CoxOrdering cox_ordering(const std::vector<double>& times) {
  CoxOrdering ord;
  ord.order.resize(times.size());
  std::iota(ord.order.begin(), ord.order.end(), std::size_t{0});
  std::stable_sort(ord.order.begin(), ord.order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  for (std::size_t i = 0; i < ord.order.size();) {
    std::size_t j = i;
    while (j < ord.order.size() && times[ord.order[j]] == times[ord.order[i]]) ++j;
    ord.group_start.push_back(i);
    ord.group_time.push_back(times[ord.order[i]]);
    i = j;
  }
  ord.group_start.push_back(ord.order.size());
  return ord;
}

}  // namespace detail

// Log partial likelihood with analytic gradient and Hessian, Efron or
// Breslow tie handling. Computed on centered columns for stability.
inline PartialLikelihood cox_partial_loglik(const DesignMatrix& design,
                                            const std::vector<double>& times,
                                            const std::vector<bool>& events,
                                            const std::vector<double>& coef,
                                            TieMethod tie_method = TieMethod::Efron) {
  const std::size_t n = design.n_rows;
  const std::size_t p = design.values.size();
  if (times.size() != n || events.size() != n) {
    throw std::domain_error("cox_partial_loglik: size mismatch");
  }
  if (coef.size() != p) throw std::domain_error("cox_partial_loglik: coef width mismatch");
  for (double b : coef) {
    if (!std::isfinite(b)) throw std::domain_error("cox_partial_loglik: non-finite coef");
  }
  bool any_event = false;
  for (bool e : events) any_event |= e;
  if (!any_event) throw NumericError("cox_partial_loglik: no events");

  std::vector<double> eta(n, 0.0);
  double max_abs_eta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t c = 0; c < p; ++c) v += coef[c] * design.centered(i, c);
    eta[i] = v;
    max_abs_eta = std::max(max_abs_eta, std::abs(v));
  }
  if (max_abs_eta > 500.0) {
    throw NumericError(
        "cox_partial_loglik: linear predictor magnitude exceeds 500; rescale or center "
        "covariates");
  }

  const auto ord = detail::cox_ordering(times);
  PartialLikelihood out;
  out.gradient.assign(p, 0.0);
  out.hessian = Matrix(p, p);

  // Walk distinct times from largest to smallest, growing the risk-set
  // accumulators S0, S1, S2.
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0);
  Matrix s2(p, p);
  std::vector<double> xi(p);
  const std::size_t n_groups = ord.group_time.size();
  for (std::size_t g = n_groups; g-- > 0;) {
    const std::size_t begin = ord.group_start[g];
    const std::size_t end = ord.group_start[g + 1];
    double tied_s0 = 0.0;
    std::vector<double> tied_s1(p, 0.0);
    Matrix tied_s2(p, p);
    std::size_t d = 0;
    double tied_eta_sum = 0.0;
    std::vector<double> tied_x_sum(p, 0.0);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = ord.order[k];
      const double w = std::exp(eta[i]);
      for (std::size_t c = 0; c < p; ++c) xi[c] = design.centered(i, c);
      s0 += w;
      for (std::size_t c = 0; c < p; ++c) {
        s1[c] += w * xi[c];
        for (std::size_t c2 = c; c2 < p; ++c2) s2(c, c2) += w * xi[c] * xi[c2];
      }
      if (events[i]) {
        ++d;
        tied_eta_sum += eta[i];
        tied_s0 += w;
        for (std::size_t c = 0; c < p; ++c) {
          tied_x_sum[c] += xi[c];
          tied_s1[c] += w * xi[c];
          for (std::size_t c2 = c; c2 < p; ++c2) tied_s2(c, c2) += w * xi[c] * xi[c2];
        }
      }
    }
    if (d == 0) continue;
    out.value += tied_eta_sum;
    for (std::size_t c = 0; c < p; ++c) out.gradient[c] += tied_x_sum[c];
    const std::size_t steps = tie_method == TieMethod::Efron ? d : 1;
    for (std::size_t l = 0; l < steps; ++l) {
      const double f = tie_method == TieMethod::Efron
                           ? static_cast<double>(l) / static_cast<double>(d)
                           : 0.0;
      const double mult = tie_method == TieMethod::Efron ? 1.0 : static_cast<double>(d);
      const double z0 = s0 - f * tied_s0;
      out.value -= mult * std::log(z0);
      for (std::size_t c = 0; c < p; ++c) {
        const double z1c = (s1[c] - f * tied_s1[c]) / z0;
        out.gradient[c] -= mult * z1c;
        for (std::size_t c2 = c; c2 < p; ++c2) {
          const double z1c2 = (s1[c2] - f * tied_s1[c2]) / z0;
          const double z2 = (s2(c, c2) - f * tied_s2(c, c2)) / z0;
          out.hessian(c, c2) -= mult * (z2 - z1c * z1c2);
        }
      }
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t c2 = c + 1; c2 < p; ++c2) out.hessian(c2, c) = out.hessian(c, c2);
  }
  return out;
}

namespace detail {

inline std::string joined_column_names(const DesignMatrix& design,
                                       const std::vector<std::size_t>& idx) {
  std::string s;
  for (std::size_t i : idx) {
    if (!s.empty()) s += ", ";
    s += design.columns[i].name;
  }
  return s;
}

}  // namespace detail

// Newton-Raphson fit of the partial likelihood from coef = 0 with
// step-halving; covariance is the inverse observed information at the
// optimum.
inline CoxModel cox_fit(const Cohort& cohort, const ModelFormula& formula,
                        TieMethod tie_method = TieMethod::Efron,
                        const std::vector<FactorCoding>* fixed_codings = nullptr) {
  DesignMatrix design = build_design(cohort, formula, fixed_codings);
  const std::size_t n = design.n_rows;
  const std::size_t p = design.values.size();
  std::vector<double> times(n);
  std::vector<bool> events(n);
  std::size_t n_events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = cohort.records[i].survival_months;
    events[i] = cohort.records[i].event;
    if (events[i]) ++n_events;
  }
  if (n_events < p) {
    throw SampleSizeError("cox_fit: fewer events (" + std::to_string(n_events) +
                          ") than design columns (" + std::to_string(p) + ")");
  }

  // Zero-variance columns can never be identified; catch them before the
  // information matrix does, for a clearer message.
  std::vector<std::size_t> degenerate;
  for (std::size_t c = 0; c < p; ++c) {
    const auto [mn, mx] = std::minmax_element(design.values[c].begin(), design.values[c].end());
    if (*mn == *mx) degenerate.push_back(c);
  }
  if (!degenerate.empty()) {
    throw CollinearityError("cox_fit: constant design column(s): " +
                            detail::joined_column_names(design, degenerate));
  }

  std::vector<double> beta(p, 0.0);
  auto pl = cox_partial_loglik(design, times, events, beta, tie_method);
  const double loglik_null = pl.value;

  // Score test pieces at beta = 0, frozen into the model for global_tests.
  Matrix info0(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) info0(i, j) = -pl.hessian(i, j);
  {
    auto ch = detail::cholesky(info0);
    if (ch.failed_pivot) {
      throw CollinearityError("cox_fit: singular information at zero; columns involved near: " +
                              design.columns[*ch.failed_pivot].name);
    }
  }
  const auto score_dir = detail::solve_spd(info0, pl.gradient);
  double score_stat = 0.0;
  for (std::size_t c = 0; c < p; ++c) score_stat += pl.gradient[c] * (*score_dir)[c];

  constexpr int max_iterations = 50;
  constexpr int max_halvings = 10;
  constexpr double rel_tol = 1e-9;
  int iterations = 0;
  for (int it = 0; it < max_iterations; ++it) {
    iterations = it + 1;
    Matrix info(p, p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) info(i, j) = -pl.hessian(i, j);
    const auto step = detail::solve_spd(info, pl.gradient);
    if (!step) {
      auto ch = detail::cholesky(info);
      throw CollinearityError("cox_fit: information matrix singular near column: " +
                              design.columns[ch.failed_pivot.value_or(0)].name);
    }
    double scale = 1.0;
    std::vector<double> candidate(p);
    PartialLikelihood next;
    bool accepted = false;
    for (int h = 0; h <= max_halvings; ++h) {
      for (std::size_t c = 0; c < p; ++c) candidate[c] = beta[c] + scale * (*step)[c];
      try {
        next = cox_partial_loglik(design, times, events, candidate, tie_method);
      } catch (const NumericError&) {
        scale *= 0.5;  // linear predictor overflowed: treat as a failed step
        continue;
      }
      if (next.value >= pl.value) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // no ascent possible: converged at current beta
    const double improvement = next.value - pl.value;
    beta = candidate;
    pl = next;
    double max_beta_eta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (std::size_t c = 0; c < p; ++c) v += beta[c] * design.centered(i, c);
      max_beta_eta = std::max(max_beta_eta, std::abs(v));
    }
    if (max_beta_eta > 80.0) {
      throw ConvergenceError(
          "cox_fit: monotone partial likelihood (coefficients diverging; perfect separation?)");
    }
    if (improvement <= rel_tol * std::max(1.0, std::abs(pl.value))) break;
  }

  double max_grad = 0.0;
  for (double g : pl.gradient) max_grad = std::max(max_grad, std::abs(g));

  Matrix info(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) info(i, j) = -pl.hessian(i, j);
  auto cov = detail::invert_spd(info);
  if (!cov) {
    throw CollinearityError("cox_fit: observed information singular at the optimum");
  }

  // Monotone-likelihood screen: under perfect separation the coefficient
  // walks out while its information vanishes, so the standard error
  // overtakes the estimate itself.
  for (std::size_t c = 0; c < p; ++c) {
    const double se = std::sqrt(std::max(0.0, (*cov)(c, c)));
    if (std::abs(beta[c]) > 10.0 && se > std::abs(beta[c])) {
      throw ConvergenceError("cox_fit: likelihood is monotone in column '" +
                             design.columns[c].name +
                             "' (perfect separation); no finite estimate exists");
    }
  }

  CoxModel model;
  model.formula = formula;
  model.columns = design.columns;
  model.codings = design.codings;
  model.column_means = design.means;
  model.coef = beta;
  model.covariance = *cov;
  model.loglik_null = loglik_null;
  model.loglik_fit = pl.value;
  model.score_statistic = score_stat;
  model.tie_method = tie_method;
  model.n = n;
  model.n_events = n_events;
  model.iterations = iterations;
  model.max_gradient = max_grad;
  return model;
}

// exp(coef) with log-scale Wald confidence intervals, in design-column order.
inline std::vector<HazardRatio> hazard_ratios(const CoxModel& model, double conf_level = 0.95) {
  if (!(conf_level > 0.0 && conf_level < 1.0)) {
    throw std::domain_error("hazard_ratios: conf_level must lie in (0, 1)");
  }
  const double z = normal_quantile(0.5 + 0.5 * conf_level);
  std::vector<HazardRatio> out;
  for (std::size_t c = 0; c < model.coef.size(); ++c) {
    HazardRatio hr;
    hr.term = model.columns[c].name;
    hr.coef = model.coef[c];
    hr.se_coef = std::sqrt(std::max(0.0, model.covariance(c, c)));
    hr.hr = std::exp(hr.coef);
    hr.ci_lower = std::exp(hr.coef - z * hr.se_coef);
    hr.ci_upper = std::exp(hr.coef + z * hr.se_coef);
    out.push_back(hr);
  }
  return out;
}

// Table-7-style ranking: hazard ratios sorted descending.
inline std::vector<HazardRatio> rank_hazard_ratios(const CoxModel& model,
                                                   double conf_level = 0.95) {
  auto hrs = hazard_ratios(model, conf_level);
  std::stable_sort(hrs.begin(), hrs.end(),
                   [](const HazardRatio& a, const HazardRatio& b) { return a.hr > b.hr; });
  return hrs;
}

// Likelihood-ratio, Wald, and score chi-square tests of the global null.
inline GlobalTests global_tests(const CoxModel& model) {
  const std::size_t p = model.coef.size();
  GlobalTests out;
  const int df = static_cast<int>(p);

  out.likelihood_ratio.statistic = 2.0 * (model.loglik_fit - model.loglik_null);
  if (out.likelihood_ratio.statistic < 0.0) out.likelihood_ratio.statistic = 0.0;
  out.likelihood_ratio.df = df;
  out.likelihood_ratio.p_value = chisq_sf(out.likelihood_ratio.statistic, df);

  auto info = detail::invert_spd(model.covariance);
  if (!info) throw NumericError("global_tests: singular covariance");
  out.wald.statistic = detail::quadratic_form(model.coef, *info);
  out.wald.df = df;
  out.wald.p_value = chisq_sf(out.wald.statistic, df);

  out.score.statistic = model.score_statistic;
  out.score.df = df;
  out.score.p_value = chisq_sf(out.score.statistic, df);
  return out;
}

// Wald chi-square for one term (possibly spanning several columns).
inline TestResult term_wald_test(const CoxModel& model, std::size_t term_index) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    if (model.columns[c].term_index == term_index) cols.push_back(c);
  }
  if (cols.empty()) throw std::domain_error("term_wald_test: term has no columns");
  const std::size_t k = cols.size();
  Matrix sub(k, k);
  std::vector<double> b(k);
  for (std::size_t i = 0; i < k; ++i) {
    b[i] = model.coef[cols[i]];
    for (std::size_t j = 0; j < k; ++j) sub(i, j) = model.covariance(cols[i], cols[j]);
  }
  auto inv = detail::invert_spd(sub);
  if (!inv) throw NumericError("term_wald_test: singular covariance block");
  TestResult res;
  res.statistic = detail::quadratic_form(b, *inv);
  res.df = static_cast<int>(k);
  res.p_value = chisq_sf(res.statistic, res.df);
  return res;
}

struct StepwiseRemoval {
  std::string term;
  double p_value = 0.0;
  int step = 0;
};

struct StepwiseResult {
  CoxModel model;
  std::vector<StepwiseRemoval> trace;
};

// Backward elimination on term-level Wald p-values: repeatedly drop the
// least significant removable term above alpha (mains are pinned while any
// of their interactions remain), refitting after each removal. Ties break
// toward the earliest term.
inline StepwiseResult stepwise_backward(const Cohort& cohort, const ModelFormula& initial,
                                        double alpha = 0.05,
                                        TieMethod tie_method = TieMethod::Efron) {
  StepwiseResult result;
  ModelFormula formula = initial;
  int step = 0;
  for (;;) {
    CoxModel model = cox_fit(cohort, formula, tie_method);
    std::optional<std::size_t> worst;
    double worst_p = alpha;
    for (std::size_t ti = 0; ti < formula.terms.size(); ++ti) {
      const Term& term = formula.terms[ti];
      if (!term.is_interaction()) {
        const bool pinned = std::any_of(
            formula.terms.begin(), formula.terms.end(), [&](const Term& other) {
              return other.is_interaction() &&
                     std::find(other.factors.begin(), other.factors.end(), term.factors[0]) !=
                         other.factors.end();
            });
        if (pinned) continue;
      }
      const auto wald = term_wald_test(model, ti);
      if (wald.p_value > worst_p) {
        worst_p = wald.p_value;
        worst = ti;
      }
    }
    if (!worst) {
      result.model = std::move(model);
      return result;
    }
    ++step;
    result.trace.push_back({formula.terms[*worst].label(), worst_p, step});
    formula.terms.erase(formula.terms.begin() + static_cast<std::ptrdiff_t>(*worst));
    formula.source.clear();  // label now derives from the remaining terms
    if (formula.terms.empty()) {
      throw NumericError("stepwise_backward: all terms eliminated at alpha=" +
                         std::to_string(alpha));
    }
  }
}

// Breslow estimator of the cumulative baseline hazard, reported on the
// original covariate scale (linear predictor at x = 0).
inline BaselineHazard breslow_baseline(const CoxModel& model, const Cohort& cohort) {
  DesignMatrix design = build_design(cohort, model.formula, &model.codings);
  const std::size_t n = design.n_rows;
  const std::size_t p = design.values.size();
  if (p != model.coef.size()) {
    throw std::domain_error("breslow_baseline: model/cohort column mismatch");
  }
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
  const auto ord = detail::cox_ordering(times);
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
  // Move from the centered to the raw-covariate reference point.
  double mean_eta = 0.0;
  for (std::size_t c = 0; c < p; ++c) mean_eta += model.coef[c] * design.means[c];
  const double rescale = std::exp(-mean_eta);

  BaselineHazard base;
  double h = 0.0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (event_count[g] == 0) continue;
    h += static_cast<double>(event_count[g]) / risk_sum[g];
    base.times.push_back(ord.group_time[g]);
    base.cumhaz.push_back(h * rescale);
  }
  return base;
}

}  // namespace survivalkit
