#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "support/simulate.hpp"
#include "survivalkit/gof.hpp"

using Catch::Matchers::WithinAbs;
namespace sk = survivalkit;

namespace {

sk::ParametricModel weib(double shape = 2.0, double scale = 50.0, double location = 10.0) {
  return sk::ParametricModel::weibull3p(shape, scale, location);
}

std::vector<double> model_quantiles(const sk::ParametricModel& m,
                                    const std::vector<double>& levels) {
  std::vector<double> out;
  for (double p : levels) out.push_back(sk::dist_quantile(m, p));
  return out;
}

}  // namespace

TEST_CASE("asymptotic reference distributions match published points", "[gof]") {
  // Kolmogorov distribution (values cross-checked against scipy.special.kolmogorov)
  REQUIRE_THAT(sk::kolmogorov_sf(0.5), WithinAbs(0.9639452437, 1e-9));
  REQUIRE_THAT(sk::kolmogorov_sf(1.0), WithinAbs(0.2699996717, 1e-9));
  REQUIRE_THAT(sk::kolmogorov_sf(2.0), WithinAbs(0.0006709253, 1e-9));
  // Anderson-Darling case-0 upper tail points (D'Agostino & Stephens)
  REQUIRE_THAT(sk::anderson_darling_sf(1.933), WithinAbs(0.10, 2e-3));
  REQUIRE_THAT(sk::anderson_darling_sf(2.492), WithinAbs(0.05, 2e-3));
  REQUIRE_THAT(sk::anderson_darling_sf(3.857), WithinAbs(0.01, 1e-3));
}

TEST_CASE("ks_test statistic follows the definition", "[gof][ks]") {
  const auto m = weib();

  SECTION("nine exact deciles give D = 1/10") {
    std::vector<double> levels;
    for (int i = 1; i <= 9; ++i) levels.push_back(i / 10.0);
    const auto data = model_quantiles(m, levels);
    const auto rep = sk::ks_test(data, m);
    // oracle by direct evaluation: F(x_i) = i/10 on n = 9 points
    double d = 0.0;
    for (int i = 1; i <= 9; ++i) {
      d = std::max(d, std::max(i / 9.0 - i / 10.0, i / 10.0 - (i - 1) / 9.0));
    }
    REQUIRE_THAT(rep.statistic, WithinAbs(d, 1e-12));
    REQUIRE_THAT(rep.statistic, WithinAbs(0.1, 1e-12));
  }

  SECTION("a single point at the median gives D = 1/2") {
    const auto rep = sk::ks_test({sk::dist_quantile(m, 0.5)}, m);
    REQUIRE_THAT(rep.statistic, WithinAbs(0.5, 1e-12));
  }

  SECTION("support violations are errors") {
    REQUIRE_THROWS_AS(sk::ks_test({m.location - 1.0, 20.0}, m), sk::SupportError);
    REQUIRE_THROWS_AS(sk::ks_test({}, m), std::domain_error);
  }
}

TEST_CASE("ad_test statistic and invariances", "[gof][ad]") {
  const auto m = weib();

  SECTION("exact mid-quantiles match the formula oracle") {
    std::vector<double> levels;
    const int n = 10;
    for (int i = 1; i <= n; ++i) levels.push_back((i - 0.5) / n);
    const auto data = model_quantiles(m, levels);
    const auto rep = sk::ad_test(data, m);
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) {
      const double fi = (i - 0.5) / n;
      const double fni = (n - i + 0.5) / n;  // F at the (n+1-i)-th order statistic
      sum += (2.0 * i - 1.0) * (std::log(fi) + std::log1p(-fni));
    }
    const double oracle = -n - sum / n;
    REQUIRE_THAT(rep.statistic, WithinAbs(oracle, 1e-12));
    REQUIRE(rep.statistic > 0.0);
  }

  SECTION("common translation of data and threshold leaves statistics unchanged") {
    std::mt19937_64 gen(321);
    std::vector<double> data(40);
    for (auto& x : data) x = testsupport::weibull3p_draw(gen, 2.0, 50.0, 10.0);
    const auto shifted_model = sk::ParametricModel::weibull3p(2.0, 50.0, 10.0 + 37.5);
    std::vector<double> shifted(data);
    for (auto& x : shifted) x += 37.5;
    REQUIRE_THAT(sk::ad_test(shifted, shifted_model).statistic,
                 WithinAbs(sk::ad_test(data, weib()).statistic, 1e-10));
    REQUIRE_THAT(sk::ks_test(shifted, shifted_model).statistic,
                 WithinAbs(sk::ks_test(data, weib()).statistic, 1e-10));
    REQUIRE_THAT(sk::chisq_gof_test(shifted, shifted_model, 6).statistic,
                 WithinAbs(sk::chisq_gof_test(data, weib(), 6).statistic, 1e-10));

    // positive rescaling of data, scale, and threshold together
    const auto scaled_model = sk::ParametricModel::weibull3p(2.0, 50.0 * 2.5, 10.0 * 2.5);
    std::vector<double> scaled(data);
    for (auto& x : scaled) x *= 2.5;
    REQUIRE_THAT(sk::ad_test(scaled, scaled_model).statistic,
                 WithinAbs(sk::ad_test(data, weib()).statistic, 1e-10));
  }

  SECTION("degenerate CDF values raise a numerical-support error") {
    const auto m5 = sk::ParametricModel::weibull3p(5.0, 10.0, 0.0);
    REQUIRE_THROWS_AS(sk::ad_test({1.0, 2.0, 1e9}, m5), sk::SupportError);
  }
}

TEST_CASE("chisq_gof_test equal-probability binning", "[gof][chisq]") {
  const auto m = weib();

  SECTION("hand-assigned counts {7,7,6,7,6,7} give statistic 0.2") {
    // place points strictly inside each equal-probability bin
    std::vector<double> data;
    const std::vector<int> counts = {7, 7, 6, 7, 6, 7};
    for (int j = 0; j < 6; ++j) {
      for (int k = 0; k < counts[j]; ++k) {
        const double p = (j + (k + 0.5) / counts[j]) / 6.0;
        data.push_back(sk::dist_quantile(m, p));
      }
    }
    const auto rep = sk::chisq_gof_test(data, m, 6);
    REQUIRE_THAT(rep.statistic, WithinAbs(0.2, 1e-12));
    REQUIRE(rep.bins == 6);
    REQUIRE(rep.df == 5);  // hand-specified model: no fitted parameters
  }

  SECTION("perfectly balanced counts give statistic 0 and p = 1") {
    std::vector<double> data;
    for (int j = 0; j < 6; ++j) {
      for (int k = 0; k < 8; ++k) data.push_back(sk::dist_quantile(m, (j + (k + 0.5) / 8.0) / 6.0));
    }
    const auto rep = sk::chisq_gof_test(data, m, 6);
    REQUIRE_THAT(rep.statistic, WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(rep.p_value, WithinAbs(1.0, 1e-12));
  }

  SECTION("auto bin count follows max(4, ceil(1 + log2 n))") {
    std::mt19937_64 gen(5150);
    std::vector<double> data(200);
    for (auto& x : data) x = testsupport::weibull3p_draw(gen, 2.0, 50.0, 10.0);
    const auto rep = sk::chisq_gof_test(data, m);
    REQUIRE(rep.bins == 9);  // ceil(1 + log2(200)) = 9
  }

  SECTION("df guard: fitted 3-parameter model with k = 4 leaves no df") {
    std::mt19937_64 gen(5151);
    std::vector<double> data(40);
    for (auto& x : data) x = testsupport::weibull3p_draw(gen, 2.0, 50.0, 10.0);
    auto fitted = m;
    fitted.n = 40;  // marks parameters as estimated from this data
    REQUIRE_THROWS_AS(sk::chisq_gof_test(data, fitted, 4), sk::NumericError);
  }

  SECTION("n < 5k is a sample-size error") {
    std::vector<double> data(20, 30.0);
    REQUIRE_THROWS_AS(sk::chisq_gof_test(data, m, 6), sk::SampleSizeError);
  }
}

TEST_CASE("bootstrap p-values are reproducible and consistent", "[gof][bootstrap]") {
  std::mt19937_64 gen(60601);
  std::vector<double> data(200);
  for (auto& x : data) x = testsupport::lognormal3p_draw(gen, 4.0, 0.4, 5.0);
  const auto fit = sk::fit_mle_3p(data, sk::ParametricFamily::Lognormal3P);

  sk::BootstrapOptions boot;
  boot.replicates = 1000;
  boot.seed = 99;

  SECTION("same seed, same p") {
    const auto a = sk::ks_test(data, fit, sk::PValueMode::Bootstrap, boot);
    const auto b = sk::ks_test(data, fit, sk::PValueMode::Bootstrap, boot);
    REQUIRE(a.p_value == b.p_value);
    REQUIRE(a.p_mode == sk::PValueMode::Bootstrap);
  }

  SECTION("asymptotic and bootstrap p agree for well-specified data") {
    // On an idealized well-specified sample both modes saturate near 1; on a
    // random draw the asymptotic mode ignores the parameter-estimation
    // effect, which is exactly why Bootstrap mode exists.
    std::vector<double> ideal(200);
    for (int i = 0; i < 200; ++i) ideal[i] = sk::dist_quantile(fit, (i + 0.5) / 200.0);
    const auto refit = sk::fit_mle_3p(ideal, sk::ParametricFamily::Lognormal3P);
    const auto asym = sk::ks_test(ideal, refit, sk::PValueMode::Asymptotic);
    const auto bs = sk::ks_test(ideal, refit, sk::PValueMode::Bootstrap, boot);
    REQUIRE(std::abs(asym.p_value - bs.p_value) < 0.15);
    const auto ad_asym = sk::ad_test(ideal, refit, sk::PValueMode::Asymptotic);
    const auto ad_bs = sk::ad_test(ideal, refit, sk::PValueMode::Bootstrap, boot);
    REQUIRE(std::abs(ad_asym.p_value - ad_bs.p_value) < 0.15);
  }
}

TEST_CASE("rank_families fits both families and sorts by AD", "[gof]") {
  std::mt19937_64 gen(2718);
  std::vector<double> data(150);
  for (auto& x : data) x = testsupport::weibull3p_draw(gen, 3.0, 90.0, 5.0);
  const auto ranked = sk::rank_families(data);
  REQUIRE(ranked.size() == 2);
  REQUIRE(ranked[0].ad.statistic <= ranked[1].ad.statistic);
  for (const auto& fg : ranked) {
    REQUIRE(fg.ks.n == data.size());
    REQUIRE(fg.ad.p_value >= 0.0);
    REQUIRE(fg.chisq.bins >= 4);
  }
}
