#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "survivalkit/core_math.hpp"
#include "survivalkit/errors.hpp"
#include "survivalkit/parametric.hpp"
#include "survivalkit/rng.hpp"

namespace survivalkit {

enum class GofMethod { KS, AD, ChiSquare };
enum class PValueMode { Asymptotic, Bootstrap };

inline std::string to_string(GofMethod m) {
  switch (m) {
    case GofMethod::KS: return "ks";
    case GofMethod::AD: return "ad";
    default: return "chisq";
  }
}

struct GofReport {
  GofMethod method = GofMethod::KS;
  double statistic = 0.0;
  double p_value = 1.0;
  PValueMode p_mode = PValueMode::Asymptotic;
  std::size_t n = 0;
  int bins = 0;  // ChiSquare only
  int df = 0;    // ChiSquare only
};

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 20240101;
  FitOptions fit;
};

// Kolmogorov distribution survival function P(K > x), evaluated by the
// theta-series on each side of the crossover for accuracy.
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    const double t = std::exp(-constants::pi * constants::pi / (8.0 * x * x));
    double cdf = 0.0;
    for (int k = 1; k <= 20; k += 2) {
      const double term = std::pow(t, static_cast<double>(k) * static_cast<double>(k));
      cdf += term;
      if (term < 1e-18) break;
    }
    cdf *= constants::sqrt_2pi / x;
    return std::min(1.0, std::max(0.0, 1.0 - cdf));
  }
  double sf = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sf += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sf));
}

// Asymptotic all-parameters-known Anderson-Darling survival function
// (Marsaglia & Marsaglia's adinf approximation).
inline double anderson_darling_sf(double a2) {
  if (a2 <= 0.0) return 1.0;
  double cdf;
  if (a2 < 2.0) {
    cdf = std::exp(-1.2337141 / a2) / std::sqrt(a2) *
          (2.00012 +
           (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * a2) * a2) * a2) * a2) *
               a2);
  } else {
    cdf = std::exp(
        -std::exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * a2) * a2) *
                                                     a2) *
                                          a2) *
                               a2));
  }
  return std::min(1.0, std::max(0.0, 1.0 - cdf));
}

namespace detail {

inline std::vector<double> sorted_copy(const std::vector<double>& data) {
  auto s = data;
  std::sort(s.begin(), s.end());
  return s;
}

inline double ks_statistic(const std::vector<double>& sorted, const ParametricModel& model) {
  const std::size_t n = sorted.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = dist_cdf(model, sorted[i]);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - f;
    const double lo = f - static_cast<double>(i) / static_cast<double>(n);
    d = std::max(d, std::max(hi, lo));
  }
  return d;
}

inline double ad_statistic(const std::vector<double>& sorted, const ParametricModel& model) {
  const std::size_t n = sorted.size();
  const double nn = static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = dist_cdf(model, sorted[i]);
    const double fr = dist_cdf(model, sorted[n - 1 - i]);
    if (!(fi > 0.0 && fi < 1.0) || !(fr > 0.0 && fr < 1.0)) {
      throw SupportError("anderson-darling: model CDF hit 0 or 1 at a data point");
    }
    sum += (2.0 * static_cast<double>(i + 1) - 1.0) * (std::log(fi) + std::log1p(-fr));
  }
  return -nn - sum / nn;
}

struct ChiSquareLayout {
  int bins = 0;
  int df = 0;
  int fitted_params = 0;
};

inline double chisq_statistic(const std::vector<double>& sorted, const ParametricModel& model,
                              int k) {
  const std::size_t n = sorted.size();
  const double expected = static_cast<double>(n) / static_cast<double>(k);
  if (expected < 1.0) {
    throw NumericError("chi-square gof: expected count below 1 in every bin");
  }
  // Equal-probability bins under the model; count by walking the sorted data
  // past each quantile edge.
  double stat = 0.0;
  std::size_t idx = 0;
  for (int j = 1; j <= k; ++j) {
    std::size_t count = 0;
    if (j < k) {
      const double edge = dist_quantile(model, static_cast<double>(j) / static_cast<double>(k));
      while (idx < n && sorted[idx] <= edge) {
        ++idx;
        ++count;
      }
    } else {
      count = n - idx;
    }
    const double diff = static_cast<double>(count) - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

// Shared parametric bootstrap: simulate from the fitted model, refit each
// replicate, and compare the replicate statistic computed against its own
// refit. Per-replicate seeds are derived from the base seed, so results do
// not depend on evaluation order.
template <typename StatFn>
double bootstrap_p(const std::vector<double>& data, const ParametricModel& model,
                   double observed, StatFn stat_fn, const BootstrapOptions& options) {
  if (options.replicates < 1) throw std::domain_error("bootstrap: replicates must be >= 1");
  const std::size_t n = data.size();
  int at_least = 0;
  for (int b = 0; b < options.replicates; ++b) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(b)));
    std::vector<double> rep(n);
    for (std::size_t i = 0; i < n; ++i) rep[i] = dist_sample(model, rng);
    try {
      const auto refit = fit_mle_3p(rep, model.family, options.fit);
      auto sorted = sorted_copy(rep);
      if (stat_fn(sorted, refit) >= observed - 1e-12) ++at_least;
    } catch (const Error&) {
      ++at_least;  // failed refit counted against rejection (conservative)
    }
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(options.replicates + 1);
}

inline void check_support(const std::vector<double>& data, const ParametricModel& model) {
  if (data.empty()) throw std::domain_error("gof: empty data");
  for (double x : data) {
    if (!(x > model.location)) {
      throw SupportError("gof: datum at or below the model threshold");
    }
  }
}

}  // namespace detail

inline GofReport ks_test(const std::vector<double>& data, const ParametricModel& model,
                         PValueMode p_mode = PValueMode::Asymptotic,
                         const BootstrapOptions& options = {}) {
  detail::check_support(data, model);
  const auto sorted = detail::sorted_copy(data);
  GofReport rep;
  rep.method = GofMethod::KS;
  rep.p_mode = p_mode;
  rep.n = data.size();
  rep.statistic = detail::ks_statistic(sorted, model);
  if (p_mode == PValueMode::Asymptotic) {
    rep.p_value = kolmogorov_sf(std::sqrt(static_cast<double>(data.size())) * rep.statistic);
  } else {
    rep.p_value = detail::bootstrap_p(
        data, model, rep.statistic,
        [](const std::vector<double>& s, const ParametricModel& m) {
          return detail::ks_statistic(s, m);
        },
        options);
  }
  return rep;
}

inline GofReport ad_test(const std::vector<double>& data, const ParametricModel& model,
                         PValueMode p_mode = PValueMode::Asymptotic,
                         const BootstrapOptions& options = {}) {
  detail::check_support(data, model);
  const auto sorted = detail::sorted_copy(data);
  GofReport rep;
  rep.method = GofMethod::AD;
  rep.p_mode = p_mode;
  rep.n = data.size();
  rep.statistic = detail::ad_statistic(sorted, model);
  if (p_mode == PValueMode::Asymptotic) {
    rep.p_value = anderson_darling_sf(rep.statistic);
  } else {
    rep.p_value = detail::bootstrap_p(
        data, model, rep.statistic,
        [](const std::vector<double>& s, const ParametricModel& m) {
          return detail::ad_statistic(s, m);
        },
        options);
  }
  return rep;
}

// Pearson chi-square against equal-probability bins under the model.
// k_bins <= 0 selects k = max(4, ceil(1 + log2 n)). Degrees of freedom
// subtract the number of parameters estimated from this data (3 for a
// fitted model, 0 for a hand-specified one, overridable).
inline GofReport chisq_gof_test(const std::vector<double>& data, const ParametricModel& model,
                                int k_bins = 0, PValueMode p_mode = PValueMode::Asymptotic,
                                const BootstrapOptions& options = {},
                                int fitted_params_override = -1) {
  detail::check_support(data, model);
  const std::size_t n = data.size();
  int k = k_bins;
  if (k <= 0) {
    k = std::max(4, static_cast<int>(std::ceil(1.0 + std::log2(static_cast<double>(n)))));
  }
  if (k < 4) throw std::domain_error("chi-square gof: need at least 4 bins");
  if (n < 5 * static_cast<std::size_t>(k)) {
    throw SampleSizeError("chi-square gof: need n >= 5k (n=" + std::to_string(n) +
                          ", k=" + std::to_string(k) + ")");
  }
  const int fitted = fitted_params_override >= 0 ? fitted_params_override
                                                 : (model.n > 0 ? 3 : 0);
  const int df = k - 1 - fitted;
  if (df < 1) {
    throw NumericError("chi-square gof: binning leaves no degrees of freedom (k=" +
                       std::to_string(k) + ", fitted=" + std::to_string(fitted) + ")");
  }
  const auto sorted = detail::sorted_copy(data);
  GofReport rep;
  rep.method = GofMethod::ChiSquare;
  rep.p_mode = p_mode;
  rep.n = n;
  rep.bins = k;
  rep.df = df;
  rep.statistic = detail::chisq_statistic(sorted, model, k);
  if (p_mode == PValueMode::Asymptotic) {
    rep.p_value = chisq_sf(rep.statistic, df);
  } else {
    rep.p_value = detail::bootstrap_p(
        data, model, rep.statistic,
        [k](const std::vector<double>& s, const ParametricModel& m) {
          return detail::chisq_statistic(s, m, k);
        },
        options);
  }
  return rep;
}

// All three tests in Bootstrap mode over one shared set of parametric
// replicates; each statistic is compared against its own observed value.
// One refit per replicate instead of three.
struct GofBattery {
  GofReport ks;
  GofReport ad;
  GofReport chisq;
};

inline GofBattery gof_bootstrap_battery(const std::vector<double>& data,
                                        const ParametricModel& model,
                                        const BootstrapOptions& options = {}, int k_bins = 0) {
  detail::check_support(data, model);
  const std::size_t n = data.size();
  int k = k_bins;
  if (k <= 0) {
    k = std::max(4, static_cast<int>(std::ceil(1.0 + std::log2(static_cast<double>(n)))));
  }
  const auto sorted = detail::sorted_copy(data);
  GofBattery battery;
  battery.ks.method = GofMethod::KS;
  battery.ad.method = GofMethod::AD;
  battery.chisq.method = GofMethod::ChiSquare;
  for (auto* rep : {&battery.ks, &battery.ad, &battery.chisq}) {
    rep->p_mode = PValueMode::Bootstrap;
    rep->n = n;
  }
  battery.chisq.bins = k;
  battery.chisq.df = std::max(0, k - 1 - (model.n > 0 ? 3 : 0));
  battery.ks.statistic = detail::ks_statistic(sorted, model);
  battery.ad.statistic = detail::ad_statistic(sorted, model);
  battery.chisq.statistic = detail::chisq_statistic(sorted, model, k);

  int ks_ge = 0, ad_ge = 0, chisq_ge = 0;
  for (int b = 0; b < options.replicates; ++b) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(b)));
    std::vector<double> rep(n);
    for (std::size_t i = 0; i < n; ++i) rep[i] = dist_sample(model, rng);
    try {
      const auto refit = fit_mle_3p(rep, model.family, options.fit);
      auto s = detail::sorted_copy(rep);
      if (detail::ks_statistic(s, refit) >= battery.ks.statistic - 1e-12) ++ks_ge;
      if (detail::ad_statistic(s, refit) >= battery.ad.statistic - 1e-12) ++ad_ge;
      if (detail::chisq_statistic(s, refit, k) >= battery.chisq.statistic - 1e-12) ++chisq_ge;
    } catch (const Error&) {
      ++ks_ge;
      ++ad_ge;
      ++chisq_ge;
    }
  }
  const double denom = options.replicates + 1.0;
  battery.ks.p_value = (1 + ks_ge) / denom;
  battery.ad.p_value = (1 + ad_ge) / denom;
  battery.chisq.p_value = (1 + chisq_ge) / denom;
  return battery;
}

// Fit both families and report all three tests per family, ranked by the
// Anderson-Darling statistic (smallest first).
struct FamilyGof {
  ParametricModel model;
  GofReport ks;
  GofReport ad;
  GofReport chisq;
};

inline std::vector<FamilyGof> rank_families(const std::vector<double>& data,
                                            PValueMode p_mode = PValueMode::Asymptotic,
                                            const BootstrapOptions& options = {},
                                            const FitOptions& fit_options = {}) {
  std::vector<FamilyGof> out;
  for (auto family : {ParametricFamily::Weibull3P, ParametricFamily::Lognormal3P}) {
    FamilyGof fg;
    fg.model = fit_mle_3p(data, family, fit_options);
    fg.ks = ks_test(data, fg.model, p_mode, options);
    fg.ad = ad_test(data, fg.model, p_mode, options);
    fg.chisq = chisq_gof_test(data, fg.model, 0, p_mode, options);
    out.push_back(std::move(fg));
  }
  std::stable_sort(out.begin(), out.end(), [](const FamilyGof& a, const FamilyGof& b) {
    return a.ad.statistic < b.ad.statistic;
  });
  return out;
}

}  // namespace survivalkit
