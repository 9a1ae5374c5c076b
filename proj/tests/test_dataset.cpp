#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "survivalkit/dataset.hpp"

using Catch::Matchers::WithinAbs;
namespace sk = survivalkit;

namespace {

const char* kHeader = "id,age,age_at_implant,gender,survival_months,event,initial_side,n_revisions\n";

sk::ParsedCohort parse_string(const std::string& csv, sk::SchemaOptions opts = {}) {
  std::istringstream in(csv);
  return sk::parse_cohort_csv(in, opts);
}

std::string fixture_149() {
  // 109 males / 40 females, echoing the cohort's 73% male split.
  std::string csv = kHeader;
  for (int i = 0; i < 149; ++i) {
    const bool male = i < 109;
    csv += "p" + std::to_string(i + 1) + ",70," + std::to_string(40 + i % 40) + "," +
           (male ? "Male" : "Female") + "," + std::to_string(10 + i) + ",1," +
           (i % 3 == 0 ? "Left" : (i % 3 == 1 ? "Right" : "Bilateral")) + "," +
           std::to_string(i % 4) + "\n";
  }
  return csv;
}

}  // namespace

TEST_CASE("parse_cohort_csv round-trips valid input", "[dataset]") {
  const std::string csv = std::string(kHeader) +
                          "a,72,65,Male,120,1,Left,0\n"
                          "b,,61,Female,98.5,0,Right,2\n"
                          "c,80,70,Male,45,1,Bilateral,1\n";
  const auto parsed = parse_string(csv);
  REQUIRE(parsed.cohort.size() == 3);
  REQUIRE(parsed.rows_read == 3);
  REQUIRE(parsed.dropped_missing_survival == 0);
  const auto& b = parsed.cohort.records[1];
  REQUIRE(b.id == "b");
  REQUIRE_FALSE(b.age.has_value());
  REQUIRE(b.gender == sk::Gender::Female);
  REQUIRE_FALSE(b.event);
  REQUIRE_THAT(b.survival_months, WithinAbs(98.5, 1e-12));
}

TEST_CASE("schema and row errors", "[dataset]") {
  SECTION("missing mandatory column names the column") {
    const std::string csv = "id,age,age_at_implant,gender,event,initial_side,n_revisions\n";
    try {
      parse_string(csv + "a,72,65,Male,1,Left,0\n");
      FAIL("expected SchemaError");
    } catch (const sk::SchemaError& e) {
      REQUIRE(std::string(e.what()).find("survival_months") != std::string::npos);
    }
  }

  SECTION("unparseable cell reports the line number") {
    const std::string csv = std::string(kHeader) + "a,72,65,Male,oops,1,Left,0\n";
    try {
      parse_string(csv);
      FAIL("expected RowError");
    } catch (const sk::RowError& e) {
      REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SECTION("invariant violations are row errors") {
    REQUIRE_THROWS_AS(parse_string(std::string(kHeader) + "a,72,150,Male,10,1,Left,0\n"),
                      sk::RowError);  // age_at_implant outside [18, 120]
    REQUIRE_THROWS_AS(parse_string(std::string(kHeader) + "a,72,65,Male,-3,1,Left,0\n"),
                      sk::RowError);  // nonpositive survival
    REQUIRE_THROWS_AS(parse_string(std::string(kHeader) + "a,72,65,Male,10,1,Left,-1\n"),
                      sk::RowError);  // negative revisions
    REQUIRE_THROWS_AS(parse_string(std::string(kHeader) +
                                   "a,72,65,Male,10,1,Left,0\na,70,66,Male,12,1,Left,0\n"),
                      sk::RowError);  // duplicate id
  }

  SECTION("zero valid rows is an empty-cohort error") {
    const std::string csv = std::string(kHeader) + "a,72,65,Male,,1,Left,0\n";
    REQUIRE_THROWS_AS(parse_string(csv), sk::InputError);
  }
}

TEST_CASE("rows without survival time are dropped and counted", "[dataset]") {
  const std::string csv = std::string(kHeader) +
                          "a,72,65,Male,120,1,Left,0\n"
                          "b,71,61,Female,,1,Right,2\n"
                          "c,80,70,Male,45,1,Bilateral,1\n"
                          "d,66,59,Male,,1,Left,0\n"
                          "e,77,68,Female,33,1,Right,0\n";
  const auto parsed = parse_string(csv);
  REQUIRE(parsed.cohort.size() == 3);
  REQUIRE(parsed.dropped_missing_survival == 2);
}

TEST_CASE("complete-only mode excludes censored records", "[dataset]") {
  const std::string csv = std::string(kHeader) +
                          "a,72,65,Male,120,1,Left,0\n"
                          "b,71,61,Female,80,0,Right,2\n"
                          "c,80,70,Male,45,1,Bilateral,1\n";
  sk::SchemaOptions opts;
  opts.complete_only = true;
  const auto parsed = parse_string(csv, opts);
  REQUIRE(parsed.cohort.size() == 2);
  REQUIRE(parsed.censored_excluded == 1);
  for (const auto& r : parsed.cohort.records) REQUIRE(r.event);
}

TEST_CASE("header aliases and case-insensitivity", "[dataset]") {
  const std::string csv =
      "ID,Age,Age At Implant,Sex,Survival time,Status,Side,Revisions\n"
      "a,72,65,male,120,dead,left,0\n";
  const auto parsed = parse_string(csv);
  REQUIRE(parsed.cohort.size() == 1);
  REQUIRE(parsed.cohort.records[0].event);
  REQUIRE(parsed.cohort.records[0].initial_side == sk::ImplantSide::Left);
}

TEST_CASE("split_by_gender partitions the cohort", "[dataset]") {
  const auto parsed = parse_string(fixture_149());
  REQUIRE(parsed.cohort.size() == 149);
  auto [male, female] = sk::split_by_gender(parsed.cohort);
  REQUIRE(male.size() == 109);
  REQUIRE(female.size() == 40);
  REQUIRE(male.label == "Male");
  REQUIRE(female.label == "Female");

  SECTION("partition property: ids split exactly") {
    std::set<std::string> all_ids;
    for (const auto& r : parsed.cohort.records) all_ids.insert(r.id);
    std::set<std::string> split_ids;
    for (const auto& r : male.records) REQUIRE(split_ids.insert(r.id).second);
    for (const auto& r : female.records) REQUIRE(split_ids.insert(r.id).second);
    REQUIRE(split_ids == all_ids);
  }

  SECTION("shuffle invariance: same id multisets per side") {
    auto shuffled = parsed.cohort;
    std::mt19937_64 gen(7);
    std::shuffle(shuffled.records.begin(), shuffled.records.end(), gen);
    auto [male2, female2] = sk::split_by_gender(shuffled);
    auto ids = [](const sk::Cohort& c) {
      std::set<std::string> s;
      for (const auto& r : c.records) s.insert(r.id);
      return s;
    };
    REQUIRE(ids(male2) == ids(male));
    REQUIRE(ids(female2) == ids(female));
  }

  SECTION("all-male cohort degenerates to (n, 0)") {
    auto [m2, f2] = sk::split_by_gender(male);
    REQUIRE(m2.size() == male.size());
    REQUIRE(f2.empty());
  }
}

TEST_CASE("describe computes n-1 descriptive statistics", "[dataset]") {
  const std::string csv = std::string(kHeader) +
                          "a,72,65,Male,3,1,Left,0\n"
                          "b,71,61,Female,212,1,Right,2\n";
  const auto cohort = parse_string(csv).cohort;

  SECTION("{3, 212} hand computation") {
    const auto s = sk::describe(cohort, "survival_months");
    REQUIRE_THAT(s.mean, WithinAbs(107.5, 1e-12));
    REQUIRE_THAT(s.sd, WithinAbs(147.785, 1e-3));  // 104.5 * sqrt(2)
    REQUIRE(s.n == 2);
  }

  SECTION("constant column has zero sd") {
    const std::string c2 = std::string(kHeader) +
                           "a,72,65,Male,5,1,Left,0\n"
                           "b,71,61,Male,5,1,Left,0\n"
                           "c,70,62,Male,5,1,Left,0\n";
    const auto s = sk::describe(parse_string(c2).cohort, "survival_months");
    REQUIRE(s.min == 5.0);
    REQUIRE(s.max == 5.0);
    REQUIRE(s.mean == 5.0);
    REQUIRE(s.sd == 0.0);
  }

  SECTION("unknown variable raises a name error") {
    REQUIRE_THROWS_AS(sk::describe(cohort, "bogus"), sk::NameError);
  }

  SECTION("mean lies within [min, max] on random cohorts") {
    const auto big = parse_string(fixture_149()).cohort;
    for (const char* var : {"age_at_implant", "survival_months", "n_revisions"}) {
      const auto s = sk::describe(big, var);
      REQUIRE(s.min <= s.mean);
      REQUIRE(s.mean <= s.max);
    }
  }
}

TEST_CASE("parse -> serialize -> parse is idempotent", "[dataset]") {
  const auto original = parse_string(fixture_149()).cohort;
  std::ostringstream out;
  sk::write_cohort_csv(original, out);
  std::istringstream in(out.str());
  const auto reparsed = sk::parse_cohort_csv(in).cohort;
  REQUIRE(reparsed.size() == original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto& a = original.records[i];
    const auto& b = reparsed.records[i];
    REQUIRE(a.id == b.id);
    REQUIRE(a.age == b.age);
    REQUIRE(a.age_at_implant == b.age_at_implant);
    REQUIRE(a.gender == b.gender);
    REQUIRE(a.survival_months == b.survival_months);
    REQUIRE(a.event == b.event);
    REQUIRE(a.initial_side == b.initial_side);
    REQUIRE(a.n_revisions == b.n_revisions);
  }
}
