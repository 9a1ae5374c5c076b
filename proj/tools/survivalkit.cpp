// survivalkit command-line interface: KM curves, rank tests, parametric
// fits, goodness-of-fit tests, Cox models, diagnostics, and full reports
// over a cohort CSV.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "survivalkit/survivalkit.hpp"

namespace sk = survivalkit;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string input;
  std::string out;
  std::string config;
  std::string filter;  // var=value subset, e.g. gender=Male
  std::uint64_t seed = 20240101;
  bool quiet = false;
  bool complete_only = false;
};

sk::Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sk::InputError("cannot open file: " + path);
  sk::Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw sk::InputError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw sk::InputError("cannot write file: " + path);
  out << content;
}

void write_json_out(const CommonArgs& args, const sk::Json& j) {
  write_text_file(args.out, j.dump(2) + "\n");
  if (!args.quiet && !args.out.empty() && args.out != "-") {
    std::cout << "wrote " << args.out << "\n";
  }
}

sk::Cohort apply_filter(const sk::Cohort& cohort, const std::string& filter) {
  if (filter.empty()) return cohort;
  const auto eq = filter.find('=');
  if (eq == std::string::npos) {
    throw sk::InputError("--filter expects var=value, got '" + filter + "'");
  }
  const std::string var = sk::detail::canonical_name(filter.substr(0, eq));
  const std::string value = sk::detail::normalize_name(filter.substr(eq + 1));
  sk::Cohort out;
  out.label = filter.substr(eq + 1);
  for (const auto& r : cohort.records) {
    std::string have;
    if (sk::is_categorical_variable(var)) {
      have = sk::detail::normalize_name(sk::categorical_value(r, var));
    } else if (auto v = sk::detail::numeric_value(r, var)) {
      have = sk::detail::normalize_name(std::to_string(*v));
    } else {
      continue;
    }
    if (have == value) out.records.push_back(r);
  }
  if (out.empty()) throw sk::InputError("filter '" + filter + "' matched no records");
  return out;
}

sk::Cohort load_cohort(const CommonArgs& args) {
  sk::SchemaOptions opts;
  opts.complete_only = args.complete_only;
  auto parsed = sk::parse_cohort_csv(args.input, opts);
  return apply_filter(parsed.cohort, args.filter);
}

std::vector<double> column_values(const sk::Cohort& cohort, const std::string& column,
                                  bool events_only) {
  const std::string var = sk::detail::canonical_name(column);
  std::vector<double> out;
  for (const auto& r : cohort.records) {
    if (events_only && !r.event) continue;
    if (auto v = sk::detail::numeric_value(r, var)) out.push_back(*v);
  }
  if (out.empty()) throw sk::InputError("no usable values in column '" + column + "'");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"survival analysis toolkit: Kaplan-Meier, rank tests, 3-parameter "
               "lifetime models, Cox proportional hazards, and diagnostics"};
  app.require_subcommand(1);

  CommonArgs args;
  app.add_option("--input", args.input, "cohort CSV path")->envname("SURVIVALKIT_INPUT");
  app.add_option("--out", args.out, "output path ('-' for stdout)");
  app.add_option("--config", args.config, "run configuration JSON (report subcommand)");
  app.add_option("--seed", args.seed, "random seed for bootstrap/simulation paths");
  app.add_option("--filter", args.filter, "keep records with var=value (e.g. gender=Male)");
  app.add_flag("--quiet", args.quiet, "suppress progress chatter");
  app.add_flag("--complete-only", args.complete_only,
               "drop censored records at parse time (deceased-only replication mode)");

  // km
  auto* km = app.add_subcommand("km", "Kaplan-Meier survival estimate");
  std::string km_group = "gender";
  double conf = 0.95;
  km->add_option("--group", km_group, "grouping variable ('none' for pooled)");
  km->add_option("--conf", conf, "confidence level");

  // ranktest
  auto* ranktest = app.add_subcommand("ranktest", "two-group survival comparison");
  std::string rt_method = "logrank";
  std::string rt_variant = "mannwhitney";
  std::string rt_group = "gender";
  ranktest->add_option("--method", rt_method, "logrank|wilcoxon");
  ranktest->add_option("--variant", rt_variant, "mannwhitney|gehan (wilcoxon only)");
  ranktest->add_option("--group", rt_group, "grouping variable");

  // fitdist
  auto* fitdist = app.add_subcommand("fitdist", "3-parameter lifetime model MLE");
  std::string fd_family = "weibull3p";
  std::string fd_column = "survival_months";
  fitdist->add_option("--family", fd_family, "weibull3p|lognormal3p");
  fitdist->add_option("--column", fd_column, "numeric column to fit");

  // gof
  auto* gof = app.add_subcommand("gof", "goodness-of-fit test of a fitted model");
  std::string gof_model_path;
  std::string gof_method = "ks";
  std::string gof_pmode = "asymptotic";
  std::string gof_column = "survival_months";
  int gof_bins = 0;
  int gof_reps = 1000;
  gof->add_option("--model", gof_model_path, "model.json from fitdist")->required();
  gof->add_option("--method", gof_method, "ks|ad|chisq");
  gof->add_option("--pmode", gof_pmode, "asymptotic|bootstrap");
  gof->add_option("--column", gof_column, "numeric column to test");
  gof->add_option("--bins", gof_bins, "chi-square bin count (0 = auto)");
  gof->add_option("--replicates", gof_reps, "bootstrap replicates");

  // cox
  auto* cox = app.add_subcommand("cox", "Cox proportional-hazards regression");
  std::string cox_formula = "age_at_implant + initial_side + sqrt(n_revisions)";
  std::string cox_ties = "efron";
  bool cox_stepwise = false;
  double cox_alpha = 0.05;
  double cox_conf = 0.95;
  cox->add_option("--formula", cox_formula, "term formula, e.g. \"a + b + a:b + sqrt(c)\"");
  cox->add_option("--ties", cox_ties, "efron|breslow");
  cox->add_flag("--stepwise", cox_stepwise, "backward elimination from the given formula");
  cox->add_option("--alpha", cox_alpha, "stepwise retention threshold");
  cox->add_option("--conf", cox_conf, "hazard-ratio confidence level");

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "Cox model residual diagnostics");
  std::string diag_model_path;
  std::string diag_transform = "km";
  std::string diag_plots;
  diagnose->add_option("--model", diag_model_path, "coxmodel.json from cox")->required();
  diagnose->add_option("--transform", diag_transform, "ph-test time transform: km|rank|identity");
  diagnose->add_option("--plots", diag_plots, "directory for one SVG per residual kind");

  // report
  auto* report_cmd = app.add_subcommand("report", "full pipeline report");
  std::string report_plots;
  report_cmd->add_option("--plots", report_plots, "directory for SVG plots");

  CLI11_PARSE(app, argc, argv);

  if (km->parsed()) {
    const auto cohort = load_cohort(args);
    sk::Json out;
    out["conf_level"] = conf;
    sk::Json curves;
    if (sk::detail::canonical_name(km_group) == "gender" && args.filter.empty()) {
      auto [male, female] = sk::split_by_gender(cohort);
      if (!male.empty()) curves["Male"] = sk::to_json(sk::km_fit(male, conf));
      if (!female.empty()) curves["Female"] = sk::to_json(sk::km_fit(female, conf));
    } else {
      curves[cohort.label] = sk::to_json(sk::km_fit(cohort, conf));
    }
    out["curves"] = curves;
    write_json_out(args, out);
    return 0;
  }

  if (ranktest->parsed()) {
    const auto cohort = load_cohort(args);
    if (sk::detail::canonical_name(rt_group) != "gender") {
      throw sk::InputError("ranktest currently groups by gender");
    }
    auto [male, female] = sk::split_by_gender(cohort);
    sk::RankTestResult res;
    const std::string method = sk::detail::normalize_name(rt_method);
    if (method == "logrank") {
      res = sk::logrank_test(male, female);
    } else if (method == "wilcoxon") {
      const std::string variant = sk::detail::normalize_name(rt_variant);
      res = sk::wilcoxon_test(male, female,
                              variant == "gehan" ? sk::WilcoxonVariant::Gehan
                                                 : sk::WilcoxonVariant::MannWhitney);
    } else {
      throw sk::InputError("unknown rank test method: " + rt_method);
    }
    write_json_out(args, sk::to_json(res));
    if (!args.quiet) {
      std::cout << "statistic=" << res.statistic << " p=" << res.p_value << "\n";
    }
    return 0;
  }

  if (fitdist->parsed()) {
    const auto cohort = load_cohort(args);
    const auto family = sk::detail::parse_family(fd_family);
    const std::string var = sk::detail::canonical_name(fd_column);
    bool censored_present = false;
    for (const auto& r : cohort.records) censored_present |= !r.event;
    sk::ParametricModel model;
    std::vector<sk::ProfilePoint> trace;
    bool censoring_used = false;
    if (var == "survival_months" && censored_present) {
      std::vector<double> times;
      std::vector<bool> events;
      for (const auto& r : cohort.records) {
        times.push_back(r.survival_months);
        events.push_back(r.event);
      }
      model = sk::fit_mle_3p_censored(times, events, family);
      censoring_used = true;
    } else {
      const auto values = column_values(cohort, fd_column, false);
      model = sk::fit_mle_3p(values, family, {}, &trace);
    }
    sk::Json out = sk::to_json(model);
    out["column"] = var;
    out["censoring_used"] = censoring_used;
    out["tool_version"] = sk::version;
    sk::Json trace_json = sk::Json::array();
    for (const auto& pt : trace) {
      trace_json.push_back(sk::Json{{"location", pt.location}, {"loglik", pt.loglik}});
    }
    out["profile_trace"] = trace_json;
    write_json_out(args, out);
    if (!args.quiet) {
      std::cout << sk::to_string(family) << ": shape=" << model.shape
                << " scale=" << model.scale << " location=" << model.location
                << " loglik=" << model.loglik << "\n";
    }
    return 0;
  }

  if (gof->parsed()) {
    const auto cohort = load_cohort(args);
    const auto model = sk::parametric_model_from_json(read_json_file(gof_model_path));
    const auto values = column_values(cohort, gof_column, true);
    const auto pmode = sk::detail::parse_pmode(gof_pmode);
    sk::BootstrapOptions boot;
    boot.replicates = gof_reps;
    boot.seed = args.seed;
    sk::GofReport rep;
    const std::string method = sk::detail::normalize_name(gof_method);
    if (method == "ks") {
      rep = sk::ks_test(values, model, pmode, boot);
    } else if (method == "ad") {
      rep = sk::ad_test(values, model, pmode, boot);
    } else if (method == "chisq" || method == "chi_square") {
      rep = sk::chisq_gof_test(values, model, gof_bins, pmode, boot);
    } else {
      throw sk::InputError("unknown gof method: " + gof_method);
    }
    write_json_out(args, sk::to_json(rep));
    if (!args.quiet) {
      std::cout << method << ": statistic=" << rep.statistic << " p=" << rep.p_value << "\n";
    }
    return 0;
  }

  if (cox->parsed()) {
    const auto cohort = load_cohort(args);
    const auto formula = sk::parse_formula(cox_formula);
    const auto ties = sk::detail::parse_tie_method(cox_ties);
    sk::Json out;
    sk::CoxModel model;
    if (cox_stepwise) {
      auto sw = sk::stepwise_backward(cohort, formula, cox_alpha, ties);
      model = std::move(sw.model);
      sk::Json trace = sk::Json::array();
      for (const auto& rem : sw.trace) {
        trace.push_back(
            sk::Json{{"term", rem.term}, {"p_value", rem.p_value}, {"step", rem.step}});
      }
      out["elimination_trace"] = trace;
    } else {
      model = sk::cox_fit(cohort, formula, ties);
    }
    sk::Json mj = sk::to_json(model, cox_conf);
    mj["filter"] = args.filter;
    for (auto it = mj.begin(); it != mj.end(); ++it) out[it.key()] = it.value();
    const auto tests = sk::global_tests(model);
    out["global_tests"] = sk::Json{{"likelihood_ratio", sk::to_json(tests.likelihood_ratio)},
                                   {"wald", sk::to_json(tests.wald)},
                                   {"score", sk::to_json(tests.score)}};
    write_json_out(args, out);
    if (!args.quiet) {
      for (const auto& hr : sk::hazard_ratios(model, cox_conf)) {
        std::cout << hr.term << ": coef=" << hr.coef << " HR=" << hr.hr << " ["
                  << hr.ci_lower << ", " << hr.ci_upper << "]\n";
      }
    }
    return 0;
  }

  if (diagnose->parsed()) {
    const auto model_json = read_json_file(diag_model_path);
    const auto model = sk::cox_model_from_json(model_json);
    CommonArgs load_args = args;
    if (load_args.filter.empty() && model_json.contains("filter")) {
      load_args.filter = model_json.at("filter").get<std::string>();
    }
    const auto cohort = load_cohort(load_args);
    const auto transform = sk::detail::parse_transform(diag_transform);

    sk::Json out;
    out["ph_test"] = sk::to_json(sk::ph_test(model, cohort, transform));
    const auto scaled = sk::schoenfeld_residuals(model, cohort, true);
    const auto mart = sk::martingale_residuals(model, cohort);
    const auto dev = sk::deviance_residuals(model, cohort);
    const auto cs = sk::coxsnell_residuals(model, cohort);
    auto residual_json = [](const sk::ResidualSet& rs) {
      sk::Json j;
      j["kind"] = sk::to_string(rs.kind);
      j["times"] = rs.times;
      if (!rs.matrix.empty()) {
        j["columns"] = rs.column_names;
        j["values"] = rs.matrix;
      } else {
        j["ids"] = rs.ids;
        j["values"] = rs.values;
      }
      return j;
    };
    out["scaled_schoenfeld"] = residual_json(scaled);
    out["martingale"] = residual_json(mart);
    out["deviance"] = residual_json(dev);
    out["coxsnell"] = residual_json(cs.residuals);
    out["coxsnell_check"] = sk::Json{{"na_times", cs.na_times},
                                     {"na_cumhaz", cs.na_cumhaz},
                                     {"origin_slope", cs.origin_slope}};

    if (!diag_plots.empty()) {
      fs::create_directories(diag_plots);
      auto emit = [&](const std::string& name, const std::string& content) {
        write_text_file((fs::path(diag_plots) / name).string(), content);
      };
      std::vector<sk::SvgSeries> panels;
      for (std::size_t c = 0; c < scaled.column_names.size(); ++c) {
        sk::SvgSeries series;
        series.label = scaled.column_names[c];
        series.scatter = true;
        for (std::size_t k = 0; k < scaled.times.size(); ++k) {
          series.points.emplace_back(scaled.times[k], scaled.matrix[k][c]);
        }
        panels.push_back(std::move(series));
      }
      sk::AxesConfig sch_axes;
      sch_axes.y_is_probability = false;
      sch_axes.title = "Scaled Schoenfeld residuals";
      sch_axes.y_label = "scaled residual";
      sch_axes.zero_reference_line = true;
      emit("scaled_schoenfeld.svg", sk::render_xy_svg(panels, sch_axes));

      for (const auto& term : model.formula.terms) {
        if (term.is_interaction()) continue;
        const auto& var = term.factors[0].variable;
        if (!sk::detail::is_numeric_variable(var)) continue;
        const auto trend = sk::martingale_trend(model, cohort, var);
        sk::SvgSeries pts;
        pts.label = "residuals";
        pts.scatter = true;
        sk::SvgSeries smooth;
        smooth.label = "lowess";
        for (std::size_t i = 0; i < trend.x.size(); ++i) {
          pts.points.emplace_back(trend.x[i], trend.residual[i]);
          smooth.points.emplace_back(trend.x[i], trend.smooth[i]);
        }
        sk::AxesConfig axes;
        axes.y_is_probability = false;
        axes.title = "Martingale residuals vs " + var;
        axes.x_label = var;
        axes.y_label = "martingale residual";
        axes.zero_reference_line = true;
        emit("martingale_" + var + ".svg", sk::render_xy_svg({pts, smooth}, axes));
      }

      sk::SvgSeries dev_pts;
      dev_pts.label = "deviance";
      dev_pts.scatter = true;
      for (std::size_t i = 0; i < dev.values.size(); ++i) {
        dev_pts.points.emplace_back(static_cast<double>(i + 1), dev.values[i]);
      }
      sk::AxesConfig dev_axes;
      dev_axes.y_is_probability = false;
      dev_axes.title = "Deviance residuals";
      dev_axes.x_label = "subject index";
      dev_axes.y_label = "deviance residual";
      dev_axes.zero_reference_line = true;
      dev_axes.extra_y_lines = {2.5, -2.5};
      emit("deviance.svg", sk::render_xy_svg({dev_pts}, dev_axes));

      sk::SvgSeries na;
      na.label = "cumulative hazard";
      na.step = true;
      na.points.emplace_back(0.0, 0.0);
      for (std::size_t i = 0; i < cs.na_times.size(); ++i) {
        na.points.emplace_back(cs.na_times[i], cs.na_cumhaz[i]);
      }
      sk::AxesConfig cs_axes;
      cs_axes.y_is_probability = false;
      cs_axes.title = "Cox-Snell residuals";
      cs_axes.x_label = "Cox-Snell residual";
      cs_axes.y_label = "Nelson-Aalen cumulative hazard";
      cs_axes.identity_reference_line = true;
      emit("coxsnell.svg", sk::render_xy_svg({na}, cs_axes));
    }

    write_json_out(args, out);
    return 0;
  }

  if (report_cmd->parsed()) {
    sk::RunConfig cfg;
    if (!args.config.empty()) cfg = sk::run_config_from_json(read_json_file(args.config));
    if (!args.input.empty()) cfg.input_path = args.input;
    if (app.count("--seed") > 0) cfg.seed = args.seed;
    if (app.count("--complete-only") > 0) cfg.complete_only = args.complete_only;
    if (!report_plots.empty()) cfg.plots = true;
    if (cfg.input_path.empty()) throw sk::InputError("report: no input file configured");

    const auto result = sk::run_pipeline(cfg);
    write_text_file(args.out.empty() ? "-" : args.out, result.report.dump(2) + "\n");
    if (cfg.plots) {
      const fs::path dir = report_plots.empty() ? fs::path("plots") : fs::path(report_plots);
      fs::create_directories(dir);
      for (const auto& [name, content] : result.artifacts) {
        write_text_file((dir / name).string(), content);
      }
      if (!args.quiet) {
        std::cout << "wrote " << result.artifacts.size() << " plot(s) to " << dir.string()
                  << "\n";
      }
    }
    return result.any_section_failed ? 3 : 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sk::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const sk::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
