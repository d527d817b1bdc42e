#include <doctest.h>

#include "oracles.hpp"
#include "sslab/errors.hpp"
#include "sslab/likelihood.hpp"
#include "sslab/simulate.hpp"

#include <cmath>
#include <sstream>

using namespace sslab;
using doctest::Approx;

TEST_CASE("scenario 1 layout") {
  const auto s = scenario1_spec();
  CHECK(s.n_drugs == 922);
  CHECK(s.n_signals() == 90);
  CHECK(s.n_drugs - s.n_signals() == 832);
  CHECK(s.beta(0) == -9.36);
  CHECK(s.sigma_d.kind == SigmaDSpec::Kind::identity);
  const auto small = scenario1_spec(300);
  CHECK(small.n_signals() == 30);
  CHECK(small.layout.size() == 4);
}

TEST_CASE("scenario 2 layout") {
  const auto s = scenario2_spec();
  CHECK(s.n_drugs == 100);
  CHECK(s.n_signals() == 20);
  CHECK(s.sigma_d.first_k == 30);
  Rng rng(1);
  const auto sd = scenario_sigma_d(rng, s);
  CHECK(sd(39, 49) == 0.0);
  CHECK(sd(49, 39) == 0.0);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      if (i != j) {
        CHECK(sd(i, j) >= 0.25 - 1e-3);
        CHECK(sd(i, j) <= 0.40 + 1e-3);
      }
  CHECK((sd.diagonal().array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("baseline event probability") {
  CHECK(logistic(-9.36) == Approx(8.6e-5).epsilon(0.01));
}

TEST_CASE("generation is reproducible and truth has the layout cardinality") {
  auto s = scenario2_spec();
  const auto a = generate_dataset(77, s);
  const auto b = generate_dataset(77, s);
  CHECK(a.data.records() == b.data.records());
  CHECK(a.data.n_drugs() == 100);
  CHECK(a.data.records().size() == 800);
  int k = 0;
  for (auto t : a.truth) k += t;
  CHECK(k == 20);
  const auto c = generate_dataset(78, s);
  CHECK_FALSE(a.data.records() == c.data.records());
}

TEST_CASE("paired windows share stratum sizes") {
  const auto g = generate_dataset(5, scenario2_spec());
  const auto& r = g.data.records();
  for (std::size_t i = 0; i + 1 < r.size(); i += 2) {
    CHECK(r[i].post_exposure == 0);
    CHECK(r[i + 1].post_exposure == 1);
    CHECK(r[i].n_at_risk == r[i + 1].n_at_risk);
  }
}

TEST_CASE("null scenario: post/pre event ratio is about 1") {
  ScenarioSpec s = scenario2_spec();
  s.layout.clear();
  s.beta(kExposureColumn) = 0.0;
  double pre = 0, post = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const auto g = generate_dataset(derive_seed(9, "replicate", rep), s);
    for (const auto& r : g.data.records()) (r.post_exposure ? post : pre) += static_cast<double>(r.n_events);
  }
  CHECK(post / pre == Approx(1.0).epsilon(0.01));
}

TEST_CASE("a drug with theta -1 has post/pre odds ratio near exp(-1)") {
  ScenarioSpec s;
  s.n_drugs = 1;
  s.layout = {{1, -1.0}};
  s.beta = default_true_beta();
  s.beta(kExposureColumn) = 0.0;
  s.m.kind = MDistribution::Kind::fixed;
  s.m.fixed_value = 2000000000;
  const auto g = generate_dataset(3, s);
  // Mantel-Haenszel pooled odds ratio over the four covariate cells.
  double num = 0, den = 0;
  const auto& r = g.data.records();
  for (std::size_t i = 0; i < r.size(); i += 2) {
    const double a = static_cast<double>(r[i + 1].n_events), b = static_cast<double>(r[i + 1].n_at_risk) - a;
    const double c = static_cast<double>(r[i].n_events), d = static_cast<double>(r[i].n_at_risk) - c;
    const double n = a + b + c + d;
    num += a * d / n;
    den += b * c / n;
  }
  CHECK(num / den == Approx(std::exp(-1.0)).epsilon(0.02));
}

TEST_CASE("event totals sit within an order of magnitude of the expectation") {
  const auto s = scenario1_spec(300);
  const auto g = generate_dataset(11, s);
  double observed = 0, expected = 0;
  for (const auto& r : g.data.records()) {
    observed += static_cast<double>(r.n_events);
    const double eta = design_vector(r).dot(s.beta) + g.theta_1(r.drug_id) + g.theta_x(r.drug_id) * r.post_exposure;
    expected += static_cast<double>(r.n_at_risk) * logistic(eta);
  }
  MESSAGE("events observed " << observed << ", expected " << expected);
  CHECK(observed > expected / 10);
  CHECK(observed < expected * 10);
}

TEST_CASE("selection scoring") {
  std::vector<std::uint8_t> truth(100, 0);
  std::vector<int> exact;
  for (int i = 0; i < 20; ++i) {
    truth[static_cast<std::size_t>(i)] = 1;
    exact.push_back(i);
  }
  auto s = score_selection(exact, truth);
  CHECK(s.power == 1.0);
  CHECK(s.fdr == 0.0);

  std::vector<int> all(100);
  for (int i = 0; i < 100; ++i) all[static_cast<std::size_t>(i)] = i;
  s = score_selection(all, truth);
  CHECK(s.fdr == Approx(0.8));
  CHECK(s.power == 1.0);

  // 3 true and 2 false out of 20 signals.
  s = score_selection({0, 1, 2, 50, 60}, truth);
  CHECK(s.true_positives == 3);
  CHECK(s.power == Approx(3.0 / 20));
  CHECK(s.fdr == Approx(2.0 / 5));

  s = score_selection({}, truth);
  CHECK(s.fdr == 0.0);
  CHECK(s.power == 0.0);
}

TEST_CASE("median and MAD") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(median_abs_deviation({1, 2, 3, 4, 100}) == 1.0);
  CHECK_THROWS_AS(median({}), EmptyInputError);
}

TEST_CASE("spec validation") {
  auto s = scenario2_spec();
  s.layout.push_back({200, 0.3});
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = scenario2_spec();
  s.sigma_d.high = 1.2;
  CHECK_THROWS_AS(s.validate(), DomainError);
  CHECK(parse_method("eb_bh") == Method::eb_bh);
  CHECK_THROWS(parse_method("nope"));
}

TEST_CASE("benchmark with the frequentist arms") {
  auto s = scenario2_spec();
  s.n_replicates = 3;
  BenchmarkOptions o;
  o.methods = {Method::eb_bonferroni, Method::eb_bh};
  o.alphas = {{0.05, 0.05}, {0.15, 0.15}};
  const auto r = run_benchmark(s, o);
  CHECK(r.rows.size() == 3 * 2 * 2);
  REQUIRE(r.summary.size() == 4);
  for (const auto& row : r.summary) CHECK(row.n_ok == 3);
  // Bonferroni is never more liberal than BH on the same p-values.
  for (std::size_t k = 0; k + 1 < r.rows.size(); k += 2) {
    CHECK(r.rows[k].method == Method::eb_bonferroni);
    CHECK(r.rows[k].score.n_selected <= r.rows[k + 1].score.n_selected);
  }
  const auto again = run_benchmark(s, o);
  std::ostringstream a, b;
  write_metrics_csv(a, r.rows);
  write_metrics_csv(b, again.rows);
  CHECK(a.str() == b.str());
  std::ostringstream sum;
  write_benchmark_summary_csv(sum, r.summary);
  CHECK(sum.str().find("eb_bh,0.05,") != std::string::npos);
}
