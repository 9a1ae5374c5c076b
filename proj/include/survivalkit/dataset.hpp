#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "survivalkit/errors.hpp"

namespace survivalkit {

enum class Gender { Male, Female };
enum class ImplantSide { Left, Right, Bilateral };

inline std::string to_string(Gender g) { return g == Gender::Male ? "Male" : "Female"; }
inline std::string to_string(ImplantSide s) {
  switch (s) {
    case ImplantSide::Left: return "Left";
    case ImplantSide::Right: return "Right";
    default: return "Bilateral";
  }
}

// One subject. Times are months since implant; event=true means the death
// was observed, false means right-censored.
struct SurvivalRecord {
  std::string id;
  std::optional<double> age;  // years, may be missing
  double age_at_implant = 0.0;
  Gender gender = Gender::Male;
  double survival_months = 0.0;
  bool event = true;
  ImplantSide initial_side = ImplantSide::Left;
  int n_revisions = 0;
};

struct Cohort {
  std::vector<SurvivalRecord> records;
  std::string label;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct DescriptiveStats {
  std::string variable;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

struct SchemaOptions {
  // Reproduce the deceased-only filtering: censored records are excluded
  // from the cohort and counted.
  bool complete_only = false;
  // Extra header aliases, alias -> canonical name (both normalized).
  std::map<std::string, std::string> aliases;
};

struct ParsedCohort {
  Cohort cohort;
  std::size_t rows_read = 0;
  std::size_t dropped_missing_survival = 0;
  std::size_t censored_excluded = 0;
};

namespace detail {

inline std::string normalize_name(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' || c == '-' || c == '.') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  while (!out.empty() && out.front() == '_') out.erase(out.begin());
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

inline const std::map<std::string, std::string>& builtin_aliases() {
  static const std::map<std::string, std::string> m = {
      {"time", "survival_months"},
      {"survival_time", "survival_months"},
      {"survival_time_months", "survival_months"},
      {"survival", "survival_months"},
      {"side", "initial_side"},
      {"implant_side", "initial_side"},
      {"initial_implant_side", "initial_side"},
      {"sex", "gender"},
      {"revisions", "n_revisions"},
      {"number_of_revisions", "n_revisions"},
      {"num_revisions", "n_revisions"},
      {"status", "event"},
      {"death", "event"},
      {"died", "event"},
      {"age_at_implant_years", "age_at_implant"},
      {"subject", "id"},
      {"patient_id", "id"},
  };
  return m;
}

// Resolve a header or variable name to its canonical column name.
inline std::string canonical_name(std::string_view raw,
                                  const std::map<std::string, std::string>& extra = {}) {
  std::string n = normalize_name(raw);
  if (auto it = extra.find(n); it != extra.end()) return it->second;
  if (auto it = builtin_aliases().find(n); it != builtin_aliases().end()) return it->second;
  return n;
}

// Split one CSV record; handles quoted fields with embedded commas and
// doubled quotes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::optional<double> parse_real(const std::string& cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw RowError("unparseable numeric cell '" + cell + "'");
  }
  if (pos != t.size() || !std::isfinite(v)) {
    throw RowError("unparseable numeric cell '" + cell + "'");
  }
  return v;
}

inline std::optional<bool> parse_event(const std::string& cell) {
  const std::string t = normalize_name(trim(cell));
  if (t.empty()) return std::nullopt;
  if (t == "1" || t == "true" || t == "yes" || t == "dead" || t == "deceased") return true;
  if (t == "0" || t == "false" || t == "no" || t == "alive" || t == "censored") return false;
  throw RowError("unparseable event cell '" + cell + "'");
}

inline std::optional<Gender> parse_gender(const std::string& cell) {
  const std::string t = normalize_name(trim(cell));
  if (t.empty()) return std::nullopt;
  if (t == "male" || t == "m") return Gender::Male;
  if (t == "female" || t == "f") return Gender::Female;
  throw RowError("unparseable gender cell '" + cell + "'");
}

inline std::optional<ImplantSide> parse_side(const std::string& cell) {
  const std::string t = normalize_name(trim(cell));
  if (t.empty()) return std::nullopt;
  if (t == "left" || t == "l") return ImplantSide::Left;
  if (t == "right" || t == "r") return ImplantSide::Right;
  if (t == "bilateral" || t == "b" || t == "both") return ImplantSide::Bilateral;
  throw RowError("unparseable initial_side cell '" + cell + "'");
}

}  // namespace detail

// Parse a cohort CSV. The header must name the six study covariates plus an
// event column (case-insensitive, aliases allowed); an id column is optional
// and synthesized when absent. Rows lacking a survival time are dropped and
// counted rather than imputed.
inline ParsedCohort parse_cohort_csv(std::istream& in, const SchemaOptions& options = {},
                                     const std::string& label = "all") {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    col[detail::canonical_name(header[i], options.aliases)] = i;
  }
  static const char* mandatory[] = {"age",           "age_at_implant", "gender",
                                    "survival_months", "event",          "initial_side",
                                    "n_revisions"};
  for (const char* name : mandatory) {
    if (!col.count(name)) throw SchemaError(std::string("missing mandatory column: ") + name);
  }
  const bool has_id = col.count("id") > 0;

  ParsedCohort out;
  out.cohort.label = label;
  std::unordered_set<std::string> seen_ids;
  std::size_t line_no = 1;
  auto cell = [&](const std::vector<std::string>& fields, const char* name) -> std::string {
    const std::size_t idx = col.at(name);
    return idx < fields.size() ? fields[idx] : std::string();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    ++out.rows_read;
    try {
      SurvivalRecord rec;
      const auto survival = detail::parse_real(cell(fields, "survival_months"));
      if (!survival) {
        ++out.dropped_missing_survival;
        continue;
      }
      rec.survival_months = *survival;
      if (!(rec.survival_months > 0.0)) throw RowError("survival_months must be > 0");

      const auto event = detail::parse_event(cell(fields, "event"));
      if (!event) throw RowError("missing event flag");
      rec.event = *event;

      const auto gender = detail::parse_gender(cell(fields, "gender"));
      if (!gender) throw RowError("missing gender");
      rec.gender = *gender;

      const auto side = detail::parse_side(cell(fields, "initial_side"));
      if (!side) throw RowError("missing initial_side");
      rec.initial_side = *side;

      const auto aai = detail::parse_real(cell(fields, "age_at_implant"));
      if (!aai) throw RowError("missing age_at_implant");
      rec.age_at_implant = *aai;
      if (rec.age_at_implant < 18.0 || rec.age_at_implant > 120.0) {
        throw RowError("age_at_implant outside [18, 120]");
      }

      rec.age = detail::parse_real(cell(fields, "age"));
      if (rec.age && !(*rec.age > 0.0)) throw RowError("age must be > 0");

      const auto revisions = detail::parse_real(cell(fields, "n_revisions"));
      if (!revisions) throw RowError("missing n_revisions");
      if (*revisions < 0.0 || *revisions != std::floor(*revisions)) {
        throw RowError("n_revisions must be a nonnegative integer");
      }
      rec.n_revisions = static_cast<int>(*revisions);

      rec.id = has_id ? detail::trim(cell(fields, "id")) : std::string();
      if (rec.id.empty()) rec.id = "r" + std::to_string(line_no);
      if (!seen_ids.insert(rec.id).second) throw RowError("duplicate id '" + rec.id + "'");

      if (options.complete_only && !rec.event) {
        ++out.censored_excluded;
        continue;
      }
      out.cohort.records.push_back(std::move(rec));
    } catch (const RowError& e) {
      throw RowError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.cohort.records.empty()) {
    throw InputError("empty cohort: no valid rows after filtering");
  }
  return out;
}

inline ParsedCohort parse_cohort_csv(const std::string& path, const SchemaOptions& options = {},
                                     const std::string& label = "all") {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return parse_cohort_csv(in, options, label);
}

inline void write_cohort_csv(const Cohort& cohort, std::ostream& out) {
  out << "id,age,age_at_implant,gender,survival_months,event,initial_side,n_revisions\n";
  out.precision(17);
  for (const auto& r : cohort.records) {
    out << r.id << ',';
    if (r.age) out << *r.age;
    out << ',' << r.age_at_implant << ',' << to_string(r.gender) << ',' << r.survival_months
        << ',' << (r.event ? 1 : 0) << ',' << to_string(r.initial_side) << ',' << r.n_revisions
        << '\n';
  }
}

// Partition into ("Male", "Female") cohorts preserving input order.
inline std::pair<Cohort, Cohort> split_by_gender(const Cohort& cohort) {
  std::pair<Cohort, Cohort> out;
  out.first.label = "Male";
  out.second.label = "Female";
  for (const auto& r : cohort.records) {
    (r.gender == Gender::Male ? out.first : out.second).records.push_back(r);
  }
  return out;
}

namespace detail {

inline std::optional<double> numeric_value(const SurvivalRecord& r, const std::string& var) {
  if (var == "age") return r.age;
  if (var == "age_at_implant") return r.age_at_implant;
  if (var == "survival_months") return r.survival_months;
  if (var == "n_revisions") return static_cast<double>(r.n_revisions);
  return std::nullopt;
}

inline bool is_numeric_variable(const std::string& canonical) {
  return canonical == "age" || canonical == "age_at_implant" ||
         canonical == "survival_months" || canonical == "n_revisions";
}

}  // namespace detail

// Min/max/mean/sd (n-1 denominator) over the non-missing values of a numeric
// variable.
inline DescriptiveStats describe(const Cohort& cohort, const std::string& variable) {
  const std::string var = detail::canonical_name(variable);
  if (!detail::is_numeric_variable(var)) {
    throw NameError("unknown numeric variable: " + variable);
  }
  std::vector<double> vals;
  vals.reserve(cohort.size());
  for (const auto& r : cohort.records) {
    if (auto v = detail::numeric_value(r, var)) vals.push_back(*v);
  }
  if (vals.empty()) throw InputError("describe: no non-missing values for " + variable);
  DescriptiveStats s;
  s.variable = var;
  s.n = vals.size();
  s.min = *std::min_element(vals.begin(), vals.end());
  s.max = *std::max_element(vals.begin(), vals.end());
  double sum = 0.0;
  for (double v : vals) sum += v;
  s.mean = sum / static_cast<double>(vals.size());
  if (vals.size() > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  }
  return s;
}

}  // namespace survivalkit
