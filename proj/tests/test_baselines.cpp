#include <doctest.h>

#include "oracles.hpp"
#include "sslab/baselines.hpp"
#include "sslab/errors.hpp"
#include "sslab/rng.hpp"

#include <cmath>

using namespace sslab;
using doctest::Approx;

namespace {

// Eight strata per drug; the post windows carry the given odds multiplier.
Dataset drugs_with_effects(const std::vector<double>& log_or, std::int64_t m, double base_rate) {
  std::vector<StratumRecord> rs;
  std::vector<std::string> names;
  for (std::size_t d = 0; d < log_or.size(); ++d) {
    names.push_back("d" + std::to_string(d));
    for (int a = 0; a < 2; ++a)
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
          const double odds = base_rate / (1 - base_rate) * std::exp(t * log_or[d]);
          const auto y = static_cast<std::int64_t>(std::llround(static_cast<double>(m) * odds / (1 + odds)));
          rs.push_back(StratumRecord{static_cast<int>(d), a, s, a * s, t, m, y});
        }
  }
  return Dataset(std::move(rs), std::move(names));
}

}  // namespace

TEST_CASE("2x2 table oracle") {
  const Dataset data({StratumRecord{0, 0, 0, 0, 0, 100000, 10}, StratumRecord{0, 0, 0, 0, 1, 100000, 20}},
                     {"a"});
  const auto fit = fit_drug_logit(data, 0);
  REQUIRE(fit.estimable);
  const double want = std::log((20.0 * 99990.0) / (10.0 * 99980.0));
  const double want_se = std::sqrt(1.0 / 10 + 1.0 / 99990 + 1.0 / 20 + 1.0 / 99980);
  CHECK(fit.estimate == Approx(want).epsilon(1e-8));
  CHECK(fit.estimate == Approx(std::log(2.0)).epsilon(1e-3));
  CHECK(fit.se == Approx(want_se).epsilon(1e-6));
}

TEST_CASE("identical strong effects are not shrunk") {
  const Dataset data = drugs_with_effects(std::vector<double>(6, 1.0), 1000000, 0.01);
  const auto fit = eb_fit(data);
  CHECK(fit.n_estimable == 6);
  CHECK_FALSE(fit.degenerate);
  for (double b : fit.shrinkage) CHECK(b > 0.99);
  for (double p : fit.p_value) CHECK(p < 1e-10);
}

TEST_CASE("null effects are shrunk to zero") {
  const Dataset data = drugs_with_effects(std::vector<double>(6, 0.0), 100000, 0.001);
  const auto fit = eb_fit(data);
  CHECK(fit.tau2 == 0.0);
  for (double v : fit.shrunken) CHECK(v == 0.0);
  for (double p : fit.p_value) CHECK(p == 1.0);
}

TEST_CASE("dataset without events is degenerate") {
  const Dataset data = drugs_with_effects(std::vector<double>(3, 0.0), 1000, 0.0);
  const auto fit = eb_fit(data);
  CHECK(fit.degenerate);
  for (double p : fit.p_value) CHECK(p == 1.0);
}

TEST_CASE("a drug with no events in either window gets p = 1") {
  std::vector<StratumRecord> rs{{0, 0, 0, 0, 0, 5000, 12}, {0, 0, 0, 0, 1, 5000, 30},
                                {1, 0, 0, 0, 0, 5000, 15}, {1, 0, 0, 0, 1, 5000, 4},
                                {2, 0, 0, 0, 0, 5000, 0},  {2, 0, 0, 0, 1, 5000, 0}};
  const Dataset data(std::move(rs), {"a", "b", "c"});
  const auto fit = eb_fit(data);
  CHECK_FALSE(fit.estimable[2]);
  CHECK(fit.n_estimable == 2);
  CHECK(fit.p_value[2] == 1.0);
  CHECK(fit.p_value[0] < 1.0);
}

TEST_CASE("EB p-values follow from the shrunken z statistic") {
  Rng rng(42);
  std::vector<double> eff;
  for (int i = 0; i < 12; ++i) eff.push_back(i < 3 ? -0.8 : 0.05 * std_normal(rng));
  const Dataset data = drugs_with_effects(eff, 50000, 0.002);
  const auto fit = eb_fit(data);
  for (std::size_t i = 0; i < eff.size(); ++i) {
    if (!fit.estimable[i]) continue;
    const double b = fit.tau2 / (fit.tau2 + fit.se[i] * fit.se[i]);
    CHECK(fit.shrinkage[i] == Approx(b));
    CHECK(fit.shrunken[i] == Approx(b * fit.estimate[i]));
    if (b > 0) {
      const double z = b * fit.estimate[i] / (std::sqrt(b) * fit.se[i]);
      CHECK(fit.z[i] == Approx(z));
      CHECK(fit.p_value[i] == Approx(2.0 * oracle::norm_cdf(-std::abs(z))).epsilon(1e-9));
    }
  }
}

TEST_CASE("multiple testing rules") {
  const std::vector<double> p{0.001, 0.02, 0.9};
  CHECK(bonferroni_select(p, 0.05) == std::vector<int>{0});
  CHECK(bh_select(p, 0.05) == std::vector<int>{0, 1});
  const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
  CHECK(bonferroni_select(ones, 0.05).empty());
  CHECK(bh_select(ones, 0.05).empty());
  CHECK(bonferroni_select(zeros, 0.05).size() == 4);
  CHECK(bh_select(zeros, 0.05).size() == 4);
  const std::vector<double> bad{0.1, 1.5};
  CHECK_THROWS_AS(bh_select(bad, 0.05), DomainError);
}

TEST_CASE("BH matches brute force and contains Bonferroni") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 150);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (auto& v : p) {
      const double u = uniform01(rng);
      v = u < 0.2 ? u * 1e-3 : uniform01(rng);
    }
    const double alpha = 0.01 + 0.2 * uniform01(rng);
    const auto bh = bh_select(p, alpha);
    CHECK(bh == oracle::brute_force_bh(p, alpha));
    for (int i : bonferroni_select(p, alpha))
      CHECK(std::find(bh.begin(), bh.end(), i) != bh.end());
  }
}

TEST_CASE("EB report rows") {
  const Dataset data = drugs_with_effects({0.7, 0.0}, 200000, 0.005);
  const auto fit = eb_fit(data);
  const auto rows = eb_report_rows(fit, data.drug_names(), {0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].selected);
  CHECK_FALSE(rows[1].selected);
  CHECK(rows[0].or_mean == Approx(std::exp(fit.shrunken[0])));
  CHECK(rows[0].or_low < rows[0].or_mean);
  CHECK(rows[0].or_high > rows[0].or_mean);
  CHECK(rows[0].direction == Direction::increased);
}
