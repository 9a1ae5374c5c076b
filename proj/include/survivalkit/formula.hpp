#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "survivalkit/dataset.hpp"
#include "survivalkit/errors.hpp"

namespace survivalkit {

enum class Transform { Identity, Sqrt, Log };

// One constituent of a model term: a variable with an optional elementwise
// transform (numeric variables only).
struct FactorRef {
  std::string variable;
  Transform transform = Transform::Identity;

  std::string label() const {
    switch (transform) {
      case Transform::Sqrt: return "sqrt(" + variable + ")";
      case Transform::Log: return "log(" + variable + ")";
      default: return variable;
    }
  }
  bool operator==(const FactorRef&) const = default;
};

// A main effect (one factor) or a two-way interaction (two factors).
struct Term {
  std::vector<FactorRef> factors;

  bool is_interaction() const { return factors.size() == 2; }
  std::string label() const {
    std::string s = factors[0].label();
    for (std::size_t i = 1; i < factors.size(); ++i) s += ":" + factors[i].label();
    return s;
  }
  bool operator==(const Term&) const = default;
};

struct ModelFormula {
  std::vector<Term> terms;
  std::map<std::string, std::string> reference_levels;  // factor variable -> reference
  std::string source;

  std::string text() const {
    if (!source.empty()) return source;
    std::string s;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (i) s += " + ";
      s += terms[i].label();
    }
    return s;
  }
};

namespace detail {

inline FactorRef parse_factor(const std::string& raw) {
  const std::string t = trim(raw);
  if (t.empty()) throw FormulaError("empty factor in formula");
  FactorRef f;
  const auto open = t.find('(');
  if (open != std::string::npos) {
    if (t.back() != ')') throw FormulaError("unbalanced parentheses in '" + t + "'");
    const std::string fn = trim(t.substr(0, open));
    const std::string arg = trim(t.substr(open + 1, t.size() - open - 2));
    if (fn == "sqrt") {
      f.transform = Transform::Sqrt;
    } else if (fn == "log") {
      f.transform = Transform::Log;
    } else {
      throw FormulaError("unknown transform '" + fn + "' (supported: sqrt, log)");
    }
    f.variable = canonical_name(arg);
  } else {
    f.variable = canonical_name(t);
  }
  if (f.variable.empty()) throw FormulaError("empty variable name in formula");
  return f;
}

}  // namespace detail

// Parse the formula mini-language: '+'-separated terms, ':' for two-way
// interactions, sqrt()/log() transforms. Hierarchy is enforced: every
// interaction's constituents must appear as main terms.
inline ModelFormula parse_formula(const std::string& text) {
  ModelFormula formula;
  formula.source = detail::trim(text);
  std::vector<std::string> chunks;
  std::string cur;
  int depth = 0;
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == '+' && depth == 0) {
      chunks.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  chunks.push_back(cur);

  for (const auto& chunk : chunks) {
    const std::string t = detail::trim(chunk);
    if (t.empty()) throw FormulaError("empty term in formula");
    Term term;
    std::string part;
    int d = 0;
    for (char c : t) {
      if (c == '(') ++d;
      if (c == ')') --d;
      if (c == ':' && d == 0) {
        term.factors.push_back(detail::parse_factor(part));
        part.clear();
      } else {
        part.push_back(c);
      }
    }
    term.factors.push_back(detail::parse_factor(part));
    if (term.factors.size() > 2) {
      throw FormulaError("only two-way interactions are supported: '" + t + "'");
    }
    formula.terms.push_back(std::move(term));
  }

  std::set<std::string> labels;
  for (const auto& term : formula.terms) {
    if (!labels.insert(term.label()).second) {
      throw FormulaError("duplicate term '" + term.label() + "'");
    }
  }
  for (const auto& term : formula.terms) {
    if (!term.is_interaction()) continue;
    for (const auto& f : term.factors) {
      const bool present = std::any_of(
          formula.terms.begin(), formula.terms.end(),
          [&](const Term& m) { return !m.is_interaction() && m.factors[0] == f; });
      if (!present) {
        throw FormulaError("interaction '" + term.label() + "' lacks main term '" + f.label() +
                           "' (hierarchy)");
      }
    }
  }
  return formula;
}

inline bool is_categorical_variable(const std::string& canonical) {
  return canonical == "gender" || canonical == "initial_side";
}

inline std::string categorical_value(const SurvivalRecord& r, const std::string& var) {
  if (var == "gender") return to_string(r.gender);
  if (var == "initial_side") return to_string(r.initial_side);
  throw NameError("unknown categorical variable: " + var);
}

// Treatment coding for one factor: reference level first, indicator columns
// for the rest.
struct FactorCoding {
  std::string variable;
  std::string reference;
  std::vector<std::string> indicator_levels;  // one column each
};

struct DesignColumn {
  std::string name;
  std::size_t term_index = 0;
};

// Design matrix plus the metadata needed to rebuild it against new data:
// column names, term spans, factor codings, and per-column means (fitting
// works on the centered copies).
struct DesignMatrix {
  std::vector<DesignColumn> columns;
  std::vector<std::vector<double>> values;  // column-major, original scale
  std::vector<double> means;
  std::vector<FactorCoding> codings;
  std::size_t n_rows = 0;

  double centered(std::size_t row, std::size_t col) const {
    return values[col][row] - means[col];
  }
};

namespace detail {

inline double transformed_numeric(const SurvivalRecord& r, const FactorRef& f) {
  const auto raw = numeric_value(r, f.variable);
  if (!raw) throw RowError("missing value of '" + f.variable + "' for id '" + r.id + "'");
  switch (f.transform) {
    case Transform::Sqrt:
      if (*raw < 0.0) {
        throw RowError("sqrt of negative value of '" + f.variable + "' for id '" + r.id + "'");
      }
      return std::sqrt(*raw);
    case Transform::Log:
      if (!(*raw > 0.0)) {
        throw RowError("log of nonpositive value of '" + f.variable + "' for id '" + r.id + "'");
      }
      return std::log(*raw);
    default:
      return *raw;
  }
}

// Columns contributed by a single factor reference.
struct FactorColumns {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

inline FactorColumns expand_factor(const Cohort& cohort, const FactorRef& f,
                                   const ModelFormula& formula,
                                   std::vector<FactorCoding>& codings,
                                   const std::vector<FactorCoding>* fixed) {
  FactorColumns out;
  if (is_categorical_variable(f.variable)) {
    if (f.transform != Transform::Identity) {
      throw FormulaError("transform applied to categorical variable '" + f.variable + "'");
    }
    FactorCoding coding;
    auto existing = std::find_if(codings.begin(), codings.end(),
                                 [&](const FactorCoding& c) { return c.variable == f.variable; });
    if (existing != codings.end()) {
      coding = *existing;
    } else if (fixed != nullptr) {
      auto fit = std::find_if(fixed->begin(), fixed->end(),
                              [&](const FactorCoding& c) { return c.variable == f.variable; });
      if (fit == fixed->end()) throw FormulaError("no stored coding for '" + f.variable + "'");
      coding = *fit;
      std::set<std::string> known(coding.indicator_levels.begin(),
                                  coding.indicator_levels.end());
      known.insert(coding.reference);
      for (const auto& r : cohort.records) {
        const std::string level = categorical_value(r, f.variable);
        if (!known.count(level)) {
          throw FormulaError("unseen level '" + level + "' for factor '" + f.variable + "'");
        }
      }
      codings.push_back(coding);
    } else {
      std::set<std::string> levels;
      for (const auto& r : cohort.records) levels.insert(categorical_value(r, f.variable));
      if (levels.size() < 2) {
        throw InputError("factor '" + f.variable + "' has fewer than 2 levels in this cohort");
      }
      coding.variable = f.variable;
      auto ref_it = formula.reference_levels.find(f.variable);
      if (ref_it != formula.reference_levels.end()) {
        if (!levels.count(ref_it->second)) {
          throw FormulaError("reference level '" + ref_it->second + "' absent for '" +
                             f.variable + "'");
        }
        coding.reference = ref_it->second;
      } else {
        coding.reference = *levels.begin();  // alphabetically first
      }
      for (const auto& level : levels) {
        if (level != coding.reference) coding.indicator_levels.push_back(level);
      }
      codings.push_back(coding);
    }
    for (const auto& level : coding.indicator_levels) {
      std::vector<double> col;
      col.reserve(cohort.size());
      for (const auto& r : cohort.records) {
        col.push_back(categorical_value(r, f.variable) == level ? 1.0 : 0.0);
      }
      out.names.push_back(f.variable + "=" + level);
      out.values.push_back(std::move(col));
    }
  } else {
    if (!is_numeric_variable(f.variable)) {
      throw NameError("unknown variable '" + f.variable + "' in formula");
    }
    std::vector<double> col;
    col.reserve(cohort.size());
    for (const auto& r : cohort.records) col.push_back(transformed_numeric(r, f));
    out.names.push_back(f.label());
    out.values.push_back(std::move(col));
  }
  return out;
}

}  // namespace detail

// Expand a formula over a cohort: treatment-coded factors, elementwise
// transforms, interaction columns as elementwise products. Pass `fixed`
// codings (from a stored model) to apply an existing coding to new data.
inline DesignMatrix build_design(const Cohort& cohort, const ModelFormula& formula,
                                 const std::vector<FactorCoding>* fixed = nullptr) {
  if (cohort.empty()) throw std::domain_error("build_design: empty cohort");
  if (formula.terms.empty()) throw FormulaError("build_design: formula has no terms");
  DesignMatrix design;
  design.n_rows = cohort.size();
  for (std::size_t ti = 0; ti < formula.terms.size(); ++ti) {
    const Term& term = formula.terms[ti];
    auto first = detail::expand_factor(cohort, term.factors[0], formula, design.codings, fixed);
    if (!term.is_interaction()) {
      for (std::size_t c = 0; c < first.values.size(); ++c) {
        design.columns.push_back({first.names[c], ti});
        design.values.push_back(std::move(first.values[c]));
      }
      continue;
    }
    auto second = detail::expand_factor(cohort, term.factors[1], formula, design.codings, fixed);
    for (std::size_t a = 0; a < first.values.size(); ++a) {
      for (std::size_t b = 0; b < second.values.size(); ++b) {
        std::vector<double> col(design.n_rows);
        for (std::size_t i = 0; i < design.n_rows; ++i) {
          col[i] = first.values[a][i] * second.values[b][i];
        }
        design.columns.push_back({first.names[a] + ":" + second.names[b], ti});
        design.values.push_back(std::move(col));
      }
    }
  }
  design.means.resize(design.values.size());
  for (std::size_t c = 0; c < design.values.size(); ++c) {
    double sum = 0.0;
    for (double v : design.values[c]) sum += v;
    design.means[c] = sum / static_cast<double>(design.n_rows);
  }
  return design;
}

}  // namespace survivalkit
