#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "survivalkit/coxph.hpp"
#include "survivalkit/dataset.hpp"
#include "survivalkit/diagnostics.hpp"
#include "survivalkit/gof.hpp"
#include "survivalkit/nonparam.hpp"
#include "survivalkit/parametric.hpp"
#include "survivalkit/svg.hpp"
#include "survivalkit/version.hpp"

namespace survivalkit {

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::string input_path;
  std::string group_variable = "gender";
  double conf_level = 0.95;
  bool complete_only = false;

  bool km = true;
  bool rank_tests = true;
  bool parametric = true;
  bool cox = true;
  bool diagnostics = true;
  bool plots = false;

  std::string cox_formula = "age_at_implant + initial_side + sqrt(n_revisions)";
  std::string ties = "efron";
  bool stepwise = false;
  double stepwise_alpha = 0.05;
  std::string gof_pmode = "asymptotic";
  int bootstrap_replicates = 1000;
  std::string ph_transform = "km";
  double deviance_flag_threshold = 2.5;  // |deviance| screening convention
  std::uint64_t seed = 20240101;
};

namespace detail {

inline TieMethod parse_tie_method(const std::string& s) {
  const std::string t = normalize_name(s);
  if (t == "efron") return TieMethod::Efron;
  if (t == "breslow") return TieMethod::Breslow;
  throw InputError("unknown tie method: " + s);
}

inline TimeTransform parse_transform(const std::string& s) {
  const std::string t = normalize_name(s);
  if (t == "km") return TimeTransform::KM;
  if (t == "rank") return TimeTransform::Rank;
  if (t == "identity") return TimeTransform::Identity;
  throw InputError("unknown ph-test transform: " + s);
}

inline PValueMode parse_pmode(const std::string& s) {
  const std::string t = normalize_name(s);
  if (t == "asymptotic") return PValueMode::Asymptotic;
  if (t == "bootstrap") return PValueMode::Bootstrap;
  throw InputError("unknown p-value mode: " + s);
}

inline ParametricFamily parse_family(const std::string& s) {
  const std::string t = normalize_name(s);
  if (t == "weibull3p" || t == "weibull") return ParametricFamily::Weibull3P;
  if (t == "lognormal3p" || t == "lognormal" || t == "log_normal") {
    return ParametricFamily::Lognormal3P;
  }
  throw InputError("unknown family: " + s);
}

}  // namespace detail

inline RunConfig run_config_from_json(const Json& j) {
  RunConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("input", cfg.input_path);
  get("group", cfg.group_variable);
  get("conf_level", cfg.conf_level);
  get("complete_only", cfg.complete_only);
  get("km", cfg.km);
  get("rank_tests", cfg.rank_tests);
  get("parametric", cfg.parametric);
  get("cox", cfg.cox);
  get("diagnostics", cfg.diagnostics);
  get("plots", cfg.plots);
  get("cox_formula", cfg.cox_formula);
  get("ties", cfg.ties);
  get("stepwise", cfg.stepwise);
  get("stepwise_alpha", cfg.stepwise_alpha);
  get("gof_pmode", cfg.gof_pmode);
  get("bootstrap_replicates", cfg.bootstrap_replicates);
  get("ph_transform", cfg.ph_transform);
  get("deviance_flag_threshold", cfg.deviance_flag_threshold);
  get("seed", cfg.seed);
  return cfg;
}

inline Json run_config_to_json(const RunConfig& cfg) {
  Json j;
  j["input"] = cfg.input_path;
  j["group"] = cfg.group_variable;
  j["conf_level"] = cfg.conf_level;
  j["complete_only"] = cfg.complete_only;
  j["km"] = cfg.km;
  j["rank_tests"] = cfg.rank_tests;
  j["parametric"] = cfg.parametric;
  j["cox"] = cfg.cox;
  j["diagnostics"] = cfg.diagnostics;
  j["plots"] = cfg.plots;
  j["cox_formula"] = cfg.cox_formula;
  j["ties"] = cfg.ties;
  j["stepwise"] = cfg.stepwise;
  j["stepwise_alpha"] = cfg.stepwise_alpha;
  j["gof_pmode"] = cfg.gof_pmode;
  j["bootstrap_replicates"] = cfg.bootstrap_replicates;
  j["ph_transform"] = cfg.ph_transform;
  j["deviance_flag_threshold"] = cfg.deviance_flag_threshold;
  j["seed"] = cfg.seed;
  return j;
}

// FNV-1a over the canonical config serialization; stable across platforms.
inline std::string config_hash(const RunConfig& cfg) {
  const std::string s = run_config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

//
// JSON views of the result types.
//

inline Json to_json(const DescriptiveStats& s) {
  return Json{{"variable", s.variable}, {"min", s.min},   {"max", s.max},
              {"mean", s.mean},         {"sd", s.sd},     {"n", s.n}};
}

inline Json to_json(const KMCurve& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows) {
    rows.push_back(Json{{"time", r.time},
                        {"n_risk", r.n_risk},
                        {"n_event", r.n_event},
                        {"survival", r.survival},
                        {"std_err", r.std_err},
                        {"ci_lower", r.ci_lower},
                        {"ci_upper", r.ci_upper}});
  }
  Json j;
  j["n_start"] = c.n_start;
  j["conf_level"] = c.conf_level;
  j["rows"] = rows;
  const auto med = km_median(c);
  j["median"] = med ? Json(*med) : Json(nullptr);
  return j;
}

inline Json to_json(const RankTestResult& r) {
  Json j;
  switch (r.method) {
    case RankTestMethod::LogRank: j["method"] = "logrank"; break;
    case RankTestMethod::WilcoxonRankSum: j["method"] = "wilcoxon_rank_sum"; break;
    case RankTestMethod::GehanWilcoxon: j["method"] = "gehan_wilcoxon"; break;
  }
  j["statistic"] = r.statistic;
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  j["exact"] = r.exact;
  return j;
}

inline Json to_json(const ParametricModel& m) {
  Json j;
  j["family"] = to_string(m.family);
  j["params"] = Json{{"shape", m.shape}, {"scale", m.scale}, {"location", m.location}};
  j["loglik"] = m.loglik;
  j["n"] = m.n;
  return j;
}

inline ParametricModel parametric_model_from_json(const Json& j) {
  ParametricModel m;
  m.family = detail::parse_family(j.at("family").get<std::string>());
  m.shape = j.at("params").at("shape").get<double>();
  m.scale = j.at("params").at("scale").get<double>();
  m.location = j.at("params").at("location").get<double>();
  m.loglik = j.value("loglik", 0.0);
  m.n = j.value("n", std::size_t{0});
  m.validate();
  return m;
}

inline Json to_json(const GofReport& g) {
  Json j;
  j["method"] = to_string(g.method);
  j["statistic"] = g.statistic;
  j["p_value"] = g.p_value;
  j["p_mode"] = g.p_mode == PValueMode::Asymptotic ? "asymptotic" : "bootstrap";
  j["n"] = g.n;
  if (g.method == GofMethod::ChiSquare) {
    j["bins"] = g.bins;
    j["df"] = g.df;
  }
  return j;
}

inline Json to_json(const TestResult& t) {
  return Json{{"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}};
}

inline Json to_json(const HazardRatio& h) {
  return Json{{"term", h.term},         {"coef", h.coef},          {"se_coef", h.se_coef},
              {"hazard_ratio", h.hr},   {"ci_lower", h.ci_lower},  {"ci_upper", h.ci_upper}};
}

inline Json to_json(const CoxModel& m, double conf_level = 0.95) {
  Json j;
  j["formula"] = m.formula.text();
  j["tie_method"] = to_string(m.tie_method);
  j["n"] = m.n;
  j["n_events"] = m.n_events;
  j["loglik_null"] = m.loglik_null;
  j["loglik_fit"] = m.loglik_fit;
  j["iterations"] = m.iterations;
  j["max_gradient"] = m.max_gradient;
  Json cols = Json::array();
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    cols.push_back(Json{{"name", m.columns[c].name},
                        {"term_index", m.columns[c].term_index},
                        {"coef", m.coef[c]},
                        {"mean", m.column_means[c]}});
  }
  j["columns"] = cols;
  Json cov = Json::array();
  for (std::size_t i = 0; i < m.covariance.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < m.covariance.cols(); ++k) row.push_back(m.covariance(i, k));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  Json codings = Json::array();
  for (const auto& c : m.codings) {
    codings.push_back(Json{{"variable", c.variable},
                           {"reference", c.reference},
                           {"indicator_levels", c.indicator_levels}});
  }
  j["codings"] = codings;
  j["score_statistic"] = m.score_statistic;
  Json hrs = Json::array();
  for (const auto& h : hazard_ratios(m, conf_level)) hrs.push_back(to_json(h));
  j["hazard_ratios"] = hrs;
  return j;
}

inline CoxModel cox_model_from_json(const Json& j) {
  CoxModel m;
  m.formula = parse_formula(j.at("formula").get<std::string>());
  m.tie_method = detail::parse_tie_method(j.at("tie_method").get<std::string>());
  m.n = j.at("n").get<std::size_t>();
  m.n_events = j.at("n_events").get<std::size_t>();
  m.loglik_null = j.at("loglik_null").get<double>();
  m.loglik_fit = j.at("loglik_fit").get<double>();
  m.iterations = j.value("iterations", 0);
  m.max_gradient = j.value("max_gradient", 0.0);
  m.score_statistic = j.value("score_statistic", 0.0);
  for (const auto& c : j.at("columns")) {
    m.columns.push_back({c.at("name").get<std::string>(), c.at("term_index").get<std::size_t>()});
    m.coef.push_back(c.at("coef").get<double>());
    m.column_means.push_back(c.at("mean").get<double>());
  }
  const auto& cov = j.at("covariance");
  m.covariance = Matrix(cov.size(), cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i) {
    for (std::size_t k = 0; k < cov.size(); ++k) m.covariance(i, k) = cov[i][k].get<double>();
  }
  for (const auto& c : j.at("codings")) {
    FactorCoding fc;
    fc.variable = c.at("variable").get<std::string>();
    fc.reference = c.at("reference").get<std::string>();
    fc.indicator_levels = c.at("indicator_levels").get<std::vector<std::string>>();
    m.codings.push_back(std::move(fc));
  }
  return m;
}

inline Json to_json(const PHTestReport& r) {
  Json j;
  j["transform"] = to_string(r.transform);
  Json terms = Json::array();
  for (const auto& t : r.terms) {
    terms.push_back(Json{{"term", t.term}, {"statistic", t.statistic}, {"p_value", t.p_value}});
  }
  j["terms"] = terms;
  j["global"] = to_json(r.global);
  return j;
}

//
// Plot builders shared by the CLI and the pipeline.
//

inline SvgSeries km_series(const KMCurve& curve, const std::string& label) {
  SvgSeries s;
  s.label = label;
  s.step = true;
  s.points.emplace_back(0.0, 1.0);
  for (const auto& r : curve.rows) s.points.emplace_back(r.time, r.survival);
  return s;
}

inline SvgSeries parametric_series(const ParametricModel& model, DistQuantity which,
                                   double t_max, const std::string& label, int grid = 240) {
  SvgSeries s;
  s.label = label;
  const double t0 = std::max(0.0, model.location + 1e-9 * std::max(1.0, std::abs(model.location)));
  for (int i = 0; i <= grid; ++i) {
    const double t = t0 + (t_max - t0) * static_cast<double>(i) / static_cast<double>(grid);
    double v;
    if (which == DistQuantity::Pdf || which == DistQuantity::Hazard) {
      if (!(t > model.location)) continue;
      v = dist_eval(model, t, which);
    } else {
      v = dist_eval(model, t, which);
    }
    s.points.emplace_back(t, v);
  }
  return s;
}

struct PipelineResult {
  Json report;
  // (relative filename, file content); SVG plots when enabled.
  std::vector<std::pair<std::string, std::string>> artifacts;
  bool any_section_failed = false;
};

namespace detail {

template <typename Fn>
void run_section(Json& report, PipelineResult& result, const std::string& name, bool enabled,
                 Fn body) {
  if (!enabled) {
    report[name] = Json{{"status", "skipped"}};
    return;
  }
  try {
    Json section;
    body(section);
    section["status"] = "ok";
    // keep status first for readability
    Json ordered;
    ordered["status"] = "ok";
    for (auto it = section.begin(); it != section.end(); ++it) {
      if (it.key() != "status") ordered[it.key()] = it.value();
    }
    report[name] = ordered;
  } catch (const std::exception& e) {
    report[name] = Json{{"status", "error"}, {"error", e.what()}};
    result.any_section_failed = true;
  }
}

inline Json residual_summary(const std::vector<double>& values) {
  Json j;
  j["n"] = values.size();
  if (values.empty()) return j;
  double mn = values[0], mx = values[0], sum = 0.0;
  for (double v : values) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
    sum += v;
  }
  j["min"] = mn;
  j["max"] = mx;
  j["mean"] = sum / static_cast<double>(values.size());
  return j;
}

}  // namespace detail

// Execute the full analysis: split -> KM -> rank tests -> parametric fits ->
// GOF -> Cox -> diagnostics, recording per-section failures without
// aborting unaffected sections. Deterministic for a fixed config and seed.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult result;
  Json& report = result.report;
  report["schema_version"] = 1;
  report["provenance"] = Json{{"tool_version", version},
                              {"seed", cfg.seed},
                              {"config_hash", config_hash(cfg)}};

  // Input errors abort: nothing downstream is meaningful without a cohort.
  SchemaOptions schema;
  schema.complete_only = cfg.complete_only;
  ParsedCohort parsed = parse_cohort_csv(cfg.input_path, schema);
  const Cohort& cohort = parsed.cohort;

  std::vector<Cohort> groups;
  if (detail::canonical_name(cfg.group_variable) == "gender") {
    auto [male, female] = split_by_gender(cohort);
    if (!male.empty()) groups.push_back(std::move(male));
    if (!female.empty()) groups.push_back(std::move(female));
  } else if (cfg.group_variable.empty() || cfg.group_variable == "none") {
    groups.push_back(cohort);
  } else {
    throw InputError("unsupported group variable: " + cfg.group_variable);
  }

  detail::run_section(report, result, "cohort", true, [&](Json& s) {
    s["n"] = cohort.size();
    s["rows_read"] = parsed.rows_read;
    s["dropped_missing_survival"] = parsed.dropped_missing_survival;
    s["censored_excluded"] = parsed.censored_excluded;
    Json sizes;
    for (const auto& g : groups) sizes[g.label] = g.size();
    s["groups"] = sizes;
    Json desc = Json::array();
    for (const char* var : {"age", "age_at_implant", "survival_months", "n_revisions"}) {
      try {
        desc.push_back(to_json(describe(cohort, var)));
      } catch (const Error&) {
        // variable entirely missing: skip its row
      }
    }
    s["descriptives"] = desc;
  });

  std::map<std::string, KMCurve> km_curves;
  detail::run_section(report, result, "km", cfg.km, [&](Json& s) {
    Json curves;
    for (const auto& g : groups) {
      KMCurve c = km_fit(g, cfg.conf_level);
      curves[g.label] = to_json(c);
      km_curves[g.label] = std::move(c);
    }
    s["curves"] = curves;
  });

  detail::run_section(report, result, "rank_tests", cfg.rank_tests, [&](Json& s) {
    if (groups.size() != 2) {
      throw InputError("rank tests need exactly two groups, have " +
                       std::to_string(groups.size()));
    }
    Json tests = Json::array();
    tests.push_back(to_json(logrank_test(groups[0], groups[1])));
    bool censored = false;
    for (const auto& g : groups) {
      for (const auto& r : g.records) censored |= !r.event;
    }
    tests.push_back(to_json(wilcoxon_test(
        groups[0], groups[1],
        censored ? WilcoxonVariant::Gehan : WilcoxonVariant::MannWhitney)));
    s["tests"] = tests;
  });

  std::map<std::string, ParametricModel> selected_models;
  detail::run_section(report, result, "parametric", cfg.parametric, [&](Json& s) {
    const PValueMode pmode = detail::parse_pmode(cfg.gof_pmode);
    BootstrapOptions boot;
    boot.replicates = cfg.bootstrap_replicates;
    boot.seed = cfg.seed;
    Json by_group;
    for (const auto& g : groups) {
      std::vector<double> times;
      for (const auto& r : g.records) {
        if (r.event) times.push_back(r.survival_months);
      }
      auto ranked = rank_families(times, pmode, boot);
      Json fits = Json::array();
      for (const auto& fg : ranked) {
        Json f = to_json(fg.model);
        f["gof"] = Json::array({to_json(fg.ks), to_json(fg.ad), to_json(fg.chisq)});
        fits.push_back(f);
      }
      Json grp;
      grp["n_events_used"] = times.size();
      grp["fits"] = fits;
      grp["selected"] = to_string(ranked.front().model.family);
      grp["median"] = dist_quantile(ranked.front().model, 0.5);
      by_group[g.label] = grp;
      selected_models.emplace(g.label, ranked.front().model);
    }
    s["groups"] = by_group;
  });

  std::map<std::string, CoxModel> cox_models;
  detail::run_section(report, result, "cox", cfg.cox, [&](Json& s) {
    const TieMethod ties = detail::parse_tie_method(cfg.ties);
    const ModelFormula formula = parse_formula(cfg.cox_formula);
    Json by_group;
    for (const auto& g : groups) {
      Json grp;
      CoxModel model;
      if (cfg.stepwise) {
        auto sw = stepwise_backward(g, formula, cfg.stepwise_alpha, ties);
        model = std::move(sw.model);
        Json trace = Json::array();
        for (const auto& rem : sw.trace) {
          trace.push_back(Json{{"term", rem.term}, {"p_value", rem.p_value}, {"step", rem.step}});
        }
        grp["elimination_trace"] = trace;
      } else {
        model = cox_fit(g, formula, ties);
      }
      grp["model"] = to_json(model, cfg.conf_level);
      const auto tests = global_tests(model);
      grp["global_tests"] = Json{{"likelihood_ratio", to_json(tests.likelihood_ratio)},
                                 {"wald", to_json(tests.wald)},
                                 {"score", to_json(tests.score)}};
      Json ranking = Json::array();
      for (const auto& h : rank_hazard_ratios(model, cfg.conf_level)) {
        ranking.push_back(to_json(h));
      }
      grp["hazard_ratio_ranking"] = ranking;
      by_group[g.label] = grp;
      cox_models.emplace(g.label, std::move(model));
    }
    s["groups"] = by_group;
  });

  detail::run_section(report, result, "diagnostics", cfg.diagnostics && cfg.cox, [&](Json& s) {
    if (cox_models.empty()) throw NumericError("diagnostics: no fitted Cox model available");
    Json by_group;
    for (const auto& g : groups) {
      auto it = cox_models.find(g.label);
      if (it == cox_models.end()) continue;
      const CoxModel& model = it->second;
      Json grp;
      grp["ph_test"] = to_json(ph_test(model, g, detail::parse_transform(cfg.ph_transform)));
      const auto mart = martingale_residuals(model, g);
      grp["martingale"] = detail::residual_summary(mart.values);
      const auto dev = deviance_residuals(model, g);
      Json dev_j = detail::residual_summary(dev.values);
      Json flagged = Json::array();
      for (std::size_t i = 0; i < dev.values.size(); ++i) {
        if (std::abs(dev.values[i]) > cfg.deviance_flag_threshold) {
          flagged.push_back(Json{{"id", dev.ids[i]}, {"deviance", dev.values[i]}});
        }
      }
      dev_j["flag_threshold"] = cfg.deviance_flag_threshold;
      dev_j["flagged"] = flagged;
      grp["deviance"] = dev_j;
      const auto cs = coxsnell_residuals(model, g);
      Json cs_j = detail::residual_summary(cs.residuals.values);
      cs_j["origin_slope"] = cs.origin_slope;
      grp["coxsnell"] = cs_j;
      by_group[g.label] = grp;
    }
    s["groups"] = by_group;
  });

  detail::run_section(report, result, "plots", cfg.plots, [&](Json& s) {
    Json files = Json::array();
    auto emit = [&](const std::string& name, const std::string& content) {
      result.artifacts.emplace_back(name, content);
      files.push_back(name);
    };
    for (const auto& g : groups) {
      const auto km_it = km_curves.find(g.label);
      if (km_it != km_curves.end()) {
        AxesConfig axes;
        axes.title = "Kaplan-Meier survival, " + g.label;
        emit("km_" + g.label + ".svg",
             render_survival_svg({km_series(km_it->second, g.label)}, axes));
      }
      const auto pm_it = selected_models.find(g.label);
      if (pm_it != selected_models.end() && km_it != km_curves.end()) {
        double t_max = 1.0;
        for (const auto& r : km_it->second.rows) t_max = std::max(t_max, r.time);
        AxesConfig axes;
        axes.title = "Parametric vs Kaplan-Meier, " + g.label;
        emit("compare_" + g.label + ".svg",
             render_survival_svg(
                 {km_series(km_it->second, "Kaplan-Meier"),
                  parametric_series(pm_it->second, DistQuantity::Survival, t_max,
                                    to_string(pm_it->second.family))},
                 axes));
        AxesConfig dist_axes;
        dist_axes.y_is_probability = false;
        dist_axes.y_label = "density";
        dist_axes.title = "Fitted density, " + g.label;
        emit("dist_pdf_" + g.label + ".svg",
             render_xy_svg({parametric_series(pm_it->second, DistQuantity::Pdf, t_max,
                                              to_string(pm_it->second.family))},
                           dist_axes));
        AxesConfig cdf_axes;
        cdf_axes.title = "Fitted CDF, " + g.label;
        cdf_axes.y_label = "cumulative probability";
        emit("dist_cdf_" + g.label + ".svg",
             render_survival_svg({parametric_series(pm_it->second, DistQuantity::Cdf, t_max,
                                                    to_string(pm_it->second.family))},
                                 cdf_axes));
      }
      const auto cox_it = cox_models.find(g.label);
      if (cox_it != cox_models.end()) {
        const CoxModel& model = cox_it->second;
        const auto scaled = schoenfeld_residuals(model, g, true);
        std::vector<SvgSeries> panels;
        for (std::size_t c = 0; c < scaled.column_names.size(); ++c) {
          SvgSeries series;
          series.label = scaled.column_names[c];
          series.scatter = true;
          for (std::size_t k = 0; k < scaled.times.size(); ++k) {
            series.points.emplace_back(scaled.times[k], scaled.matrix[k][c]);
          }
          panels.push_back(std::move(series));
        }
        AxesConfig sch_axes;
        sch_axes.y_is_probability = false;
        sch_axes.title = "Scaled Schoenfeld residuals, " + g.label;
        sch_axes.y_label = "scaled residual";
        sch_axes.zero_reference_line = true;
        emit("diag_scaled_schoenfeld_" + g.label + ".svg", render_xy_svg(panels, sch_axes));

        for (const auto& term : model.formula.terms) {
          if (term.is_interaction()) continue;
          const auto& var = term.factors[0].variable;
          if (!detail::is_numeric_variable(var)) continue;
          const auto trend = martingale_trend(model, g, var);
          SvgSeries pts;
          pts.label = "residuals";
          pts.scatter = true;
          SvgSeries smooth;
          smooth.label = "lowess";
          for (std::size_t i = 0; i < trend.x.size(); ++i) {
            pts.points.emplace_back(trend.x[i], trend.residual[i]);
            smooth.points.emplace_back(trend.x[i], trend.smooth[i]);
          }
          AxesConfig mart_axes;
          mart_axes.y_is_probability = false;
          mart_axes.title = "Martingale residuals vs " + var + ", " + g.label;
          mart_axes.x_label = var;
          mart_axes.y_label = "martingale residual";
          mart_axes.zero_reference_line = true;
          emit("diag_martingale_" + g.label + "_" + var + ".svg",
               render_xy_svg({pts, smooth}, mart_axes));
        }

        const auto dev = deviance_residuals(model, g);
        SvgSeries dev_pts;
        dev_pts.label = "deviance";
        dev_pts.scatter = true;
        for (std::size_t i = 0; i < dev.values.size(); ++i) {
          dev_pts.points.emplace_back(static_cast<double>(i + 1), dev.values[i]);
        }
        AxesConfig dev_axes;
        dev_axes.y_is_probability = false;
        dev_axes.title = "Deviance residuals, " + g.label;
        dev_axes.x_label = "subject index";
        dev_axes.y_label = "deviance residual";
        dev_axes.zero_reference_line = true;
        dev_axes.extra_y_lines = {cfg.deviance_flag_threshold, -cfg.deviance_flag_threshold};
        emit("diag_deviance_" + g.label + ".svg", render_xy_svg({dev_pts}, dev_axes));

        const auto cs = coxsnell_residuals(model, g);
        SvgSeries na;
        na.label = "cumulative hazard";
        na.step = true;
        na.points.emplace_back(0.0, 0.0);
        for (std::size_t i = 0; i < cs.na_times.size(); ++i) {
          na.points.emplace_back(cs.na_times[i], cs.na_cumhaz[i]);
        }
        AxesConfig cs_axes;
        cs_axes.y_is_probability = false;
        cs_axes.title = "Cox-Snell residuals, " + g.label;
        cs_axes.x_label = "Cox-Snell residual";
        cs_axes.y_label = "Nelson-Aalen cumulative hazard";
        cs_axes.identity_reference_line = true;
        emit("diag_coxsnell_" + g.label + ".svg", render_xy_svg({na}, cs_axes));
      }
    }
    s["files"] = files;
  });

  return result;
}

}  // namespace survivalkit
