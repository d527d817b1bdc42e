#include <doctest.h>

#include "oracles.hpp"
#include "sslab/coprescription.hpp"
#include "sslab/errors.hpp"
#include "sslab/rng.hpp"
#include "test_helpers.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

using namespace sslab;
using doctest::Approx;

TEST_CASE("conditional similarity") {
  CHECK(conditional_similarity(10, 20, 40) == Approx(0.375).epsilon(1e-15));
  CHECK(conditional_similarity(0, 20, 40) == 0.0);
  CHECK(conditional_similarity(20, 20, 20) == 1.0);
  CHECK_THROWS_AS(conditional_similarity(0, 0, 40), UndefinedSimilarity);
  CHECK(conditional_similarity(7, 30, 11) == conditional_similarity(7, 11, 30));
}

TEST_CASE("phi coefficient") {
  CHECK(pearson_binary(100, 50, 50, 25) == Approx(0.0).epsilon(1e-15));
  CHECK(pearson_binary(100, 50, 50, 50) == Approx(1.0).epsilon(1e-15));
  CHECK(pearson_binary(100, 40, 30, 20) == Approx((0.20 - 0.12) / std::sqrt(0.24 * 0.21)).epsilon(1e-12));
  CHECK(pearson_binary(100, 40, 30, 20) == Approx(0.3563).epsilon(1e-4));
  CHECK_THROWS_AS(pearson_binary(100, 0, 30, 0), UndefinedSimilarity);
  CHECK_THROWS_AS(pearson_binary(100, 100, 30, 30), UndefinedSimilarity);
  CHECK(pearson_binary(1000, 70, 300, 40) == pearson_binary(1000, 300, 70, 40));
}

TEST_CASE("cosine tetrachoric approximation") {
  CHECK(tetrachoric_approx(9, 1, 1, 9) == Approx(std::cos(oracle::kPi / 10.0)).epsilon(1e-14));
  CHECK(tetrachoric_approx(9, 1, 1, 9) == Approx(0.9511).epsilon(1e-4));
  CHECK(tetrachoric_approx(25, 25, 25, 25) == Approx(0.0).epsilon(1e-15));
  CHECK(tetrachoric_approx(1, 9, 9, 1) == Approx(-0.9511).epsilon(1e-4));
  CHECK(tetrachoric_approx(5, 0, 3, 7) == 1.0);
  CHECK(tetrachoric_approx(0, 4, 3, 7) == -1.0);
  CHECK(tetrachoric_approx(0, 0, 3, 7) == 0.0);
}

TEST_CASE("tetrachoric approximation is symmetric and monotone in the odds ratio") {
  // Swapping the two drugs swaps b and c.
  CHECK(tetrachoric_approx(30, 70, 12, 888) == tetrachoric_approx(30, 12, 70, 888));
  double prev = -2.0;
  for (int a = 1; a <= 400; a += 7) {
    const double r = tetrachoric_approx(a, 100, 100, 400);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("tetrachoric approximation matches the ML oracle on median splits") {
  // With both margins at one half the cosine formula is exact.
  for (int a : {120, 250, 380}) {
    const int b = 500 - a;
    const double approx = tetrachoric_approx(a, b, b, a);
    const double ml = oracle::ml_tetrachoric(a, b, b, a);
    CHECK(std::abs(approx - ml) < 2e-3);
  }
}

TEST_CASE("nearest_pd leaves PD correlation matrices unchanged") {
  Eigen::MatrixXd m(3, 3);
  m << 1, 0.3, 0.1, 0.3, 1, 0.2, 0.1, 0.2, 1;
  const Eigen::MatrixXd out = nearest_pd(m);
  CHECK((out - m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nearest_pd repairs a singular matrix") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 1, 1;
  const Eigen::MatrixXd out = nearest_pd(m);
  CHECK(out(0, 0) == Approx(1.0));
  CHECK(out(1, 1) == Approx(1.0));
  CHECK(out(0, 1) < 1.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out).eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("nearest_pd clears a negative eigenvalue") {
  Eigen::MatrixXd m(3, 3);
  m << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  REQUIRE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff() < 0.0);
  const double eps = 1e-6;
  const Eigen::MatrixXd out = nearest_pd(m, eps);
  // Independent check with a Jacobi SVD of the symmetric output.
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(out).singularValues();
  CHECK(sv.minCoeff() >= eps / 2);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(out).info() == Eigen::Success);
  CHECK((out - out.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((out.diagonal().array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("nearest_pd properties on random symmetric inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 12;
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = 2.0 * uniform01(rng) - 1.0;
    const Eigen::MatrixXd once = nearest_pd(m);
    const Eigen::MatrixXd twice = nearest_pd(once);
    CHECK((once - once.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((once.diagonal().array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(once).eigenvalues().minCoeff() > 0.0);
    CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("nearest_pd input checks") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 1) = std::nan("");
  CHECK_THROWS_AS(nearest_pd(m), NumericError);
  CHECK_THROWS_AS(nearest_pd(Eigen::MatrixXd::Identity(2, 3)), DimensionError);
}

TEST_CASE("build_sigma_d") {
  CoprescriptionTable t;
  t.n_total = 100;
  t.pair_counts.resize(2, 2);
  t.pair_counts << 50, 25, 25, 50;
  t.labels = {"a", "b"};

  const auto id = build_sigma_d(t, SimilarityMethod::identity);
  CHECK(id.matrix.isIdentity());
  CHECK_FALSE(id.repaired);

  const auto pe = build_sigma_d(t, SimilarityMethod::pearson);
  CHECK((pe.matrix - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_FALSE(pe.repaired);

  CoprescriptionTable empty;
  CHECK_THROWS_AS(build_sigma_d(empty, SimilarityMethod::pearson), EmptyInputError);
}

TEST_CASE("undefined pairs map to zero") {
  CoprescriptionTable t;
  t.n_total = 100;
  t.pair_counts.resize(3, 3);
  t.pair_counts << 40, 10, 0, 10, 30, 0, 0, 0, 0;
  t.labels = {"a", "b", "c"};
  const auto s = build_sigma_d(t, SimilarityMethod::conditional);
  CHECK(s.matrix(0, 2) == 0.0);
  CHECK(s.matrix(1, 2) == 0.0);
  CHECK(s.matrix(0, 1) == Approx(0.5 * (10.0 / 40 + 10.0 / 30)));
}

TEST_CASE("18-drug table: entries match the scalar rule, repair flag matches the eigenvalues") {
  const auto n_total = load_n_total(data_dir() / "copres18_n_total.txt");
  const auto t = load_coprescription(data_dir() / "copres18.csv", n_total);
  REQUIRE(t.n_drugs() == 18);
  for (auto method : {SimilarityMethod::tetrachoric, SimilarityMethod::pearson, SimilarityMethod::conditional}) {
    const auto s = build_sigma_d(t, method);
    Eigen::MatrixXd raw = Eigen::MatrixXd::Identity(18, 18);
    for (int i = 0; i < 18; ++i) {
      for (int j = 0; j < 18; ++j) {
        if (i == j) continue;
        const auto ni = t.pair_counts(i, i), nj = t.pair_counts(j, j), nij = t.pair_counts(i, j);
        double v = 0.0;
        if (method == SimilarityMethod::tetrachoric)
          v = tetrachoric_approx(nij, ni - nij, nj - nij, n_total - ni - nj + nij);
        else if (method == SimilarityMethod::pearson)
          v = pearson_binary(n_total, ni, nj, nij);
        else
          v = conditional_similarity(nij, ni, nj);
        raw(i, j) = v;
      }
    }
    const double lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(raw).eigenvalues().minCoeff();
    CHECK(s.repaired == (lam < kDefaultEpsPd));
    CHECK(s.min_eigenvalue_raw == Approx(lam).epsilon(1e-9));
    if (!s.repaired) CHECK((s.matrix - raw).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(s.min_eigenvalue >= kDefaultEpsPd * (1 - 1e-6));
  }
}

TEST_CASE("matrix CSV round trip keeps every bit") {
  Rng rng(3);
  Eigen::MatrixXd m(4, 4);
  for (int i = 0; i < 16; ++i) m.data()[i] = std_normal(rng);
  std::ostringstream out;
  write_matrix_csv(out, m, {"a", "b", "c", "d"});
  std::istringstream in(out.str());
  std::vector<std::string> labels;
  const Eigen::MatrixXd back = parse_matrix_csv(in, &labels);
  CHECK(back == m);
  CHECK(labels == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("co-prescription table validation") {
  std::istringstream bad("drug,a,b\na,10,12\nb,12,20\n");
  CHECK_THROWS_AS(parse_coprescription(bad, 100), ValidationError);
  std::istringstream asym("drug,a,b\na,10,3\nb,4,20\n");
  CHECK_THROWS_AS(parse_coprescription(asym, 100), ValidationError);
}
