#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "survivalkit/core_math.hpp"
#include "survivalkit/errors.hpp"
#include "survivalkit/rng.hpp"

namespace survivalkit {

enum class ParametricFamily { Weibull3P, Lognormal3P };

inline std::string to_string(ParametricFamily f) {
  return f == ParametricFamily::Weibull3P ? "weibull3p" : "lognormal3p";
}

// Three-parameter lifetime model. For Weibull3P: shape eta, scale theta,
// threshold tau, with F(t) = 1 - exp(-((t - tau)/theta)^eta). For
// Lognormal3P the scale field stores mu (log-scale mean), shape stores
// sigma, location stores gamma, with F(t) = Phi((ln(t - gamma) - mu)/sigma).
// Thresholds may be negative.
struct ParametricModel {
  ParametricFamily family = ParametricFamily::Weibull3P;
  double shape = 1.0;
  double scale = 1.0;
  double location = 0.0;
  double loglik = 0.0;
  std::size_t n = 0;  // 0 for hand-specified models

  static ParametricModel weibull3p(double shape, double scale, double location) {
    ParametricModel m{ParametricFamily::Weibull3P, shape, scale, location, 0.0, 0};
    m.validate();
    return m;
  }

  static ParametricModel lognormal3p(double mu, double sigma, double gamma) {
    ParametricModel m{ParametricFamily::Lognormal3P, sigma, mu, gamma, 0.0, 0};
    m.validate();
    return m;
  }

  double mu() const { return scale; }      // Lognormal3P log-scale mean
  double sigma() const { return shape; }   // Lognormal3P log-scale sd

  void validate() const {
    if (!std::isfinite(shape) || !std::isfinite(scale) || !std::isfinite(location)) {
      throw std::domain_error("parametric model: non-finite parameter");
    }
    if (!(shape > 0.0)) throw std::domain_error("parametric model: shape must be > 0");
    if (family == ParametricFamily::Weibull3P && !(scale > 0.0)) {
      throw std::domain_error("weibull3p: scale must be > 0");
    }
  }
};

enum class DistQuantity { Pdf, Cdf, Survival, Hazard };

namespace detail {

inline double weibull_z(const ParametricModel& m, double t) {
  return (t - m.location) / m.scale;
}

inline double lognormal_z(const ParametricModel& m, double t) {
  return (std::log(t - m.location) - m.mu()) / m.sigma();
}

}  // namespace detail

inline double dist_pdf(const ParametricModel& m, double t) {
  if (!std::isfinite(t)) throw std::domain_error("dist_pdf: non-finite t");
  if (!(t > m.location)) throw std::domain_error("dist_pdf: t must exceed the threshold");
  if (m.family == ParametricFamily::Weibull3P) {
    const double z = detail::weibull_z(m, t);
    return m.shape / m.scale * std::pow(z, m.shape - 1.0) * std::exp(-std::pow(z, m.shape));
  }
  const double x = t - m.location;
  const double z = detail::lognormal_z(m, t);
  return std::exp(-0.5 * z * z) / (x * m.sigma() * constants::sqrt_2pi);
}

inline double dist_logpdf(const ParametricModel& m, double t) {
  if (!std::isfinite(t)) throw std::domain_error("dist_logpdf: non-finite t");
  if (!(t > m.location)) return -std::numeric_limits<double>::infinity();
  if (m.family == ParametricFamily::Weibull3P) {
    const double z = detail::weibull_z(m, t);
    return std::log(m.shape / m.scale) + (m.shape - 1.0) * std::log(z) - std::pow(z, m.shape);
  }
  const double x = t - m.location;
  const double z = detail::lognormal_z(m, t);
  return -std::log(x * m.sigma()) - std::log(constants::sqrt_2pi) - 0.5 * z * z;
}

inline Probability dist_cdf(const ParametricModel& m, double t) {
  if (!std::isfinite(t)) throw std::domain_error("dist_cdf: non-finite t");
  if (t <= m.location) return Probability(0.0);
  if (m.family == ParametricFamily::Weibull3P) {
    return Probability(-std::expm1(-std::pow(detail::weibull_z(m, t), m.shape)));
  }
  return normal_cdf(detail::lognormal_z(m, t));
}

inline Probability dist_survival(const ParametricModel& m, double t) {
  if (!std::isfinite(t)) throw std::domain_error("dist_survival: non-finite t");
  if (t <= m.location) return Probability(1.0);
  if (m.family == ParametricFamily::Weibull3P) {
    return Probability(std::exp(-std::pow(detail::weibull_z(m, t), m.shape)));
  }
  return normal_cdf(-detail::lognormal_z(m, t));
}

inline double dist_hazard(const ParametricModel& m, double t) {
  const double s = dist_survival(m, t);
  const double f = dist_pdf(m, t);
  if (s == 0.0) return std::numeric_limits<double>::infinity();  // flagged, never NaN
  return f / s;
}

inline double dist_eval(const ParametricModel& m, double t, DistQuantity which) {
  switch (which) {
    case DistQuantity::Pdf: return dist_pdf(m, t);
    case DistQuantity::Cdf: return dist_cdf(m, t);
    case DistQuantity::Survival: return dist_survival(m, t);
    case DistQuantity::Hazard: return dist_hazard(m, t);
  }
  throw std::domain_error("dist_eval: unknown quantity");
}

// P(a <= T <= b) = F(b) - F(a).
inline Probability dist_interval_prob(const ParametricModel& m, double a, double b) {
  if (!(a <= b)) throw std::domain_error("dist_interval_prob: need a <= b");
  return Probability(std::max(0.0, static_cast<double>(dist_cdf(m, b)) -
                                       static_cast<double>(dist_cdf(m, a))));
}

// Quantile by the closed-form inverse CDF of each family.
inline double dist_quantile(const ParametricModel& m, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("dist_quantile: p must lie strictly in (0, 1)");
  }
  if (m.family == ParametricFamily::Weibull3P) {
    return m.location + m.scale * std::pow(-std::log1p(-p), 1.0 / m.shape);
  }
  return m.location + std::exp(m.mu() + m.sigma() * normal_quantile(p));
}

// Inverse-CDF draw.
inline double dist_sample(const ParametricModel& m, Rng& rng) {
  return dist_quantile(m, rng.uniform());
}

// Log-likelihood of (possibly right-censored) data: events contribute
// ln f(t), censored observations ln S(t).
inline double loglik_3p(const ParametricModel& m, const std::vector<double>& data,
                        const std::vector<bool>* events = nullptr) {
  double ll = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (events == nullptr || (*events)[i]) {
      ll += dist_logpdf(m, data[i]);
    } else {
      const double s = dist_survival(m, data[i]);
      ll += s > 0.0 ? std::log(s) : -std::numeric_limits<double>::infinity();
    }
  }
  return ll;
}

struct FitOptions {
  int grid_size = 200;        // location profile grid candidates
  double span_factor = 20.0;  // grid spans [min - span*range, min - eps]
  int refine_iters = 60;      // golden-section refinement budget
  int max_inner_iters = 100;  // Weibull shape-equation solver budget
};

struct ProfilePoint {
  double location;
  double loglik;
};

namespace detail {

struct ConditionalFit {
  double shape = 0.0;
  double scale = 0.0;
  double loglik = -std::numeric_limits<double>::infinity();
  bool ok = false;
};

// Conditional MLE of (mu, sigma) for fixed threshold: moments of ln(x - gamma).
inline ConditionalFit lognormal_conditional(const std::vector<double>& data, double gamma) {
  const std::size_t n = data.size();
  double sum = 0.0;
  double sumsq = 0.0;
  for (double x : data) {
    const double l = std::log(x - gamma);
    sum += l;
    sumsq += l * l;
  }
  const double nn = static_cast<double>(n);
  const double mu = sum / nn;
  const double var = std::max(0.0, sumsq / nn - mu * mu);
  if (!(var > 0.0)) return {};
  const double sigma = std::sqrt(var);
  ConditionalFit fit;
  fit.shape = sigma;
  fit.scale = mu;
  // ll = -sum(ln(x-gamma)) - n ln sigma - n/2 ln(2 pi) - n/2
  fit.loglik = -sum - nn * std::log(sigma) - 0.5 * nn * std::log(2.0 * constants::pi) - 0.5 * nn;
  fit.ok = true;
  return fit;
}

// Conditional MLE of (eta, theta) for fixed threshold by safeguarded Newton
// on the profile shape equation. log_y must hold ln(x - tau).
inline ConditionalFit weibull_conditional(const std::vector<double>& log_y, int max_iters) {
  const std::size_t n = log_y.size();
  const double nn = static_cast<double>(n);
  const double log_max = *std::max_element(log_y.begin(), log_y.end());
  double mean_log = 0.0;
  for (double l : log_y) mean_log += l;
  mean_log /= nn;
  double sd_log = 0.0;
  for (double l : log_y) sd_log += (l - mean_log) * (l - mean_log);
  sd_log = std::sqrt(sd_log / nn);
  if (!(sd_log > 0.0)) return {};

  // g(eta) = 1/eta + mean_log - sum(y^eta ln y)/sum(y^eta); strictly
  // decreasing with g(0+) > 0, so bracket then Newton.
  const auto eval = [&](double eta, double& g, double& dg) {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (double l : log_y) {
      const double w = std::exp(eta * (l - log_max));
      s0 += w;
      s1 += w * l;
      s2 += w * l * l;
    }
    const double a = s1 / s0;
    const double da = s2 / s0 - a * a;
    g = 1.0 / eta + mean_log - a;
    dg = -1.0 / (eta * eta) - da;
    return s0;
  };

  double lo = 1e-4;
  double hi = 1.28 / sd_log;  // moment start: sd(ln y) ~ pi/(eta sqrt(6))
  double g, dg;
  eval(hi, g, dg);
  int guard = 0;
  while (g > 0.0 && guard++ < 200) {
    lo = hi;
    hi *= 2.0;
    eval(hi, g, dg);
  }
  if (g > 0.0) return {};
  double eta = std::min(hi, std::max(lo, 1.28 / sd_log));
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    eval(eta, g, dg);
    if (g > 0.0) {
      lo = eta;
    } else {
      hi = eta;
    }
    double next = eta - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - eta) <= 1e-12 * std::max(1.0, eta)) {
      eta = next;
      converged = true;
      break;
    }
    eta = next;
  }
  if (!converged && hi - lo > 1e-6 * std::max(1.0, eta)) return {};

  double s0 = eval(eta, g, dg);
  const double log_theta = log_max + std::log(s0 / nn) / eta;
  ConditionalFit fit;
  fit.shape = eta;
  fit.scale = std::exp(log_theta);
  // ll = n ln(eta) - n ln(theta) + (eta-1) sum(ln y - ln theta) - n
  fit.loglik = nn * std::log(eta) - nn * log_theta +
               (eta - 1.0) * (mean_log * nn - nn * log_theta) - nn;
  fit.ok = true;
  return fit;
}

inline ConditionalFit conditional_fit(const std::vector<double>& data, double location,
                                      ParametricFamily family, int max_inner_iters) {
  if (family == ParametricFamily::Lognormal3P) {
    return lognormal_conditional(data, location);
  }
  std::vector<double> log_y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) log_y[i] = std::log(data[i] - location);
  return weibull_conditional(log_y, max_inner_iters);
}

}  // namespace detail

// Maximum-likelihood fit of a three-parameter lifetime model: the threshold
// is profiled on a log-spaced grid below the sample minimum, the conditional
// two-parameter problem is solved in closed form (lognormal) or by a
// safeguarded root find (Weibull), and the best grid cell is refined by
// golden-section search.
inline ParametricModel fit_mle_3p(const std::vector<double>& data, ParametricFamily family,
                                  const FitOptions& options = {},
                                  std::vector<ProfilePoint>* trace = nullptr) {
  // Any finite value is admissible: thresholds may be negative, and models
  // with negative thresholds put (small) mass below zero. Positivity of
  // survival times is enforced at the dataset layer, not here.
  for (double x : data) {
    if (!std::isfinite(x)) {
      throw std::domain_error("fit_mle_3p: times must be finite");
    }
  }
  const double min_x = data.empty() ? 0.0 : *std::min_element(data.begin(), data.end());
  const double max_x = data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
  if (!data.empty() && max_x == min_x) {
    throw DegeneracyError("fit_mle_3p: all observations identical");
  }
  std::set<double> distinct(data.begin(), data.end());
  if (distinct.size() < 8) {
    throw SampleSizeError("fit_mle_3p: need at least 8 distinct positive times, have " +
                          std::to_string(distinct.size()));
  }

  const double range = max_x - min_x;
  const double eps = 1e-6 * range;
  const int grid = std::max(options.grid_size, 2);
  const double log_lo = std::log(eps);
  const double log_hi = std::log(options.span_factor * range);

  double best_ll = -std::numeric_limits<double>::infinity();
  double best_loc = min_x - eps;
  detail::ConditionalFit best_fit;
  int best_idx = -1;
  if (trace) trace->clear();
  for (int k = 0; k < grid; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(grid - 1);
    const double offset = std::exp(log_lo + frac * (log_hi - log_lo));
    const double loc = min_x - offset;
    const auto fit = detail::conditional_fit(data, loc, family, options.max_inner_iters);
    if (trace) trace->push_back({loc, fit.ok ? fit.loglik : -std::numeric_limits<double>::infinity()});
    if (!fit.ok) continue;
    // Ties resolved toward the lowest location for determinism.
    if (fit.loglik > best_ll || (fit.loglik == best_ll && loc < best_loc)) {
      best_ll = fit.loglik;
      best_loc = loc;
      best_fit = fit;
      best_idx = k;
    }
  }
  if (best_idx < 0) {
    throw ConvergenceError("fit_mle_3p: no profile grid candidate converged");
  }

  // Golden-section refinement over ln(offset) between the grid neighbors.
  const auto offset_at = [&](int k) {
    const double frac = static_cast<double>(k) / static_cast<double>(grid - 1);
    return log_lo + frac * (log_hi - log_lo);
  };
  double a = offset_at(std::max(0, best_idx - 1));
  double b = offset_at(std::min(grid - 1, best_idx + 1));
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  auto profile = [&](double log_offset) {
    const double loc = min_x - std::exp(log_offset);
    const auto fit = detail::conditional_fit(data, loc, family, options.max_inner_iters);
    if (fit.ok && (fit.loglik > best_ll || (fit.loglik == best_ll && loc < best_loc))) {
      best_ll = fit.loglik;
      best_loc = loc;
      best_fit = fit;
    }
    return fit.ok ? fit.loglik : -std::numeric_limits<double>::infinity();
  };
  double f1 = profile(x1);
  double f2 = profile(x2);
  for (int it = 0; it < options.refine_iters; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = profile(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = profile(x1);
    }
    if (b - a < 1e-12) break;
  }

  // Profile maxima pinned to the threshold constraint with shape < 1 are the
  // classic unbounded-likelihood pathology, not a usable estimate.
  if (min_x - best_loc <= eps * (1.0 + 1e-9) && best_fit.shape < 1.0) {
    throw ConvergenceError(
        "fit_mle_3p: profile maximum sits on the threshold boundary with shape < 1 "
        "(best: shape=" +
        std::to_string(best_fit.shape) + ", scale=" + std::to_string(best_fit.scale) +
        ", location=" + std::to_string(best_loc) + ", loglik=" + std::to_string(best_ll) + ")");
  }

  ParametricModel model;
  model.family = family;
  model.shape = best_fit.shape;
  model.scale = best_fit.scale;
  model.location = best_loc;
  model.loglik = best_ll;
  model.n = data.size();
  model.validate();
  return model;
}

namespace detail {

// Small Nelder-Mead used only by the censored-data fit below.
template <typename Fn>
std::pair<std::vector<double>, double> nelder_mead_2d(Fn fn, std::vector<double> start,
                                                      double step, int max_iters) {
  struct Vertex {
    std::vector<double> x;
    double f;
  };
  std::vector<Vertex> simplex;
  simplex.push_back({start, fn(start)});
  for (int d = 0; d < 2; ++d) {
    auto x = start;
    x[d] += step * std::max(1.0, std::abs(x[d]));
    simplex.push_back({x, fn(x)});
  }
  for (int it = 0; it < max_iters; ++it) {
    std::sort(simplex.begin(), simplex.end(),
              [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    if (std::abs(simplex[2].f - simplex[0].f) < 1e-10 * (1.0 + std::abs(simplex[0].f))) break;
    std::vector<double> centroid{0.5 * (simplex[0].x[0] + simplex[1].x[0]),
                                 0.5 * (simplex[0].x[1] + simplex[1].x[1])};
    auto point = [&](double alpha) {
      std::vector<double> x(2);
      for (int d = 0; d < 2; ++d) x[d] = centroid[d] + alpha * (centroid[d] - simplex[2].x[d]);
      return x;
    };
    auto xr = point(1.0);
    const double fr = fn(xr);
    if (fr < simplex[0].f) {
      auto xe = point(2.0);
      const double fe = fn(xe);
      simplex[2] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < simplex[1].f) {
      simplex[2] = {xr, fr};
    } else {
      auto xc = point(0.5);
      const double fc = fn(xc);
      if (fc < simplex[2].f) {
        simplex[2] = {xc, fc};
      } else {
        for (int v = 1; v < 3; ++v) {
          for (int d = 0; d < 2; ++d) {
            simplex[v].x[d] = 0.5 * (simplex[v].x[d] + simplex[0].x[d]);
          }
          simplex[v].f = fn(simplex[v].x);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(),
            [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
  return {simplex[0].x, simplex[0].f};
}

}  // namespace detail

// General-mode fit honoring right censoring: the profile over the threshold
// is kept, the conditional two-parameter problem is started from the
// complete-data solution and polished by Nelder-Mead on the censored
// likelihood.
inline ParametricModel fit_mle_3p_censored(const std::vector<double>& data,
                                           const std::vector<bool>& events,
                                           ParametricFamily family,
                                           const FitOptions& options = {}) {
  if (data.size() != events.size()) {
    throw std::domain_error("fit_mle_3p_censored: data/events size mismatch");
  }
  bool any_censored = false;
  for (bool e : events) any_censored |= !e;
  if (!any_censored) return fit_mle_3p(data, family, options);

  std::vector<double> event_times;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (events[i]) event_times.push_back(data[i]);
  }
  if (event_times.size() < 8) {
    throw SampleSizeError("fit_mle_3p_censored: need at least 8 observed events");
  }
  const double min_x = *std::min_element(data.begin(), data.end());
  const double max_x = *std::max_element(data.begin(), data.end());
  const double range = max_x - min_x;
  const double eps = 1e-6 * range;
  const int grid = std::max(options.grid_size / 4, 2);
  const double log_lo = std::log(eps);
  const double log_hi = std::log(options.span_factor * range);

  ParametricModel best;
  best.family = family;
  best.n = data.size();
  double best_ll = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (int k = 0; k < grid; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(grid - 1);
    const double loc = min_x - std::exp(log_lo + frac * (log_hi - log_lo));
    const auto start = detail::conditional_fit(event_times, loc, family, options.max_inner_iters);
    if (!start.ok) continue;
    auto objective = [&](const std::vector<double>& v) {
      ParametricModel m;
      m.family = family;
      m.shape = std::exp(v[0]);
      m.scale = family == ParametricFamily::Weibull3P ? std::exp(v[1]) : v[1];
      m.location = loc;
      const double ll = loglik_3p(m, data, &events);
      return std::isfinite(ll) ? -ll : 1e300;
    };
    std::vector<double> v0{std::log(start.shape),
                           family == ParametricFamily::Weibull3P ? std::log(start.scale)
                                                                 : start.scale};
    auto [v, neg_ll] = detail::nelder_mead_2d(objective, v0, 0.05, 400);
    const double ll = -neg_ll;
    if (ll > best_ll) {
      best_ll = ll;
      best.shape = std::exp(v[0]);
      best.scale = family == ParametricFamily::Weibull3P ? std::exp(v[1]) : v[1];
      best.location = loc;
      best.loglik = ll;
      found = true;
    }
  }
  if (!found) throw ConvergenceError("fit_mle_3p_censored: no candidate converged");
  best.validate();
  return best;
}

}  // namespace survivalkit
