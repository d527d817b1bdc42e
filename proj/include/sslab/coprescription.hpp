#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sslab {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Pairwise co-use counts. Diagonal entry i is n_i (patients on drug i),
// off-diagonal (i, j) is n_ij (patients on both).
struct CoprescriptionTable {
  std::int64_t n_total = 0;
  CountMatrix pair_counts;
  std::vector<std::string> labels;

  std::size_t n_drugs() const { return static_cast<std::size_t>(pair_counts.rows()); }

  // Throws ValidationError unless symmetric with n_ij <= min(n_i, n_j) and
  // n_i <= n_total.
  void validate() const;
};

enum class SimilarityMethod { conditional, pearson, tetrachoric, identity };

std::string_view to_string(SimilarityMethod m);
SimilarityMethod parse_similarity_method(std::string_view name);

// Drug-level correlation matrix used as the among-drug factor of the prior.
struct DrugCovariance {
  Eigen::MatrixXd matrix;
  SimilarityMethod method = SimilarityMethod::identity;
  bool repaired = false;
  double min_eigenvalue_raw = 1.0;
  double min_eigenvalue = 1.0;
  double eps_pd = 1e-6;
};

inline constexpr double kDefaultEpsPd = 1e-6;

// 0.5 * (n_ab / n_a + n_ab / n_b). Throws UndefinedSimilarity if a marginal is 0.
double conditional_similarity(std::int64_t n_ab, std::int64_t n_a, std::int64_t n_b);

// Phi coefficient of the two binary use indicators.
double pearson_binary(std::int64_t n, std::int64_t n_a, std::int64_t n_b, std::int64_t n_ab);

// cos(pi / (1 + sqrt(ad / bc))) for the 2x2 table [[a, b], [c, d]].
// Zero cells take the formula's limits: bc = 0 < ad gives +1, ad = 0 < bc
// gives -1, and ad = bc = 0 gives 0.
double tetrachoric_approx(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);

// Symmetrizes, clips eigenvalues below eps_pd up to eps_pd, reconstructs, and
// rescales to unit diagonal. Clip-and-rescale repeats until the smallest
// eigenvalue is within a relative 1e-6 of eps_pd, which makes the map
// idempotent. Inputs that are already >= eps_pd come back unchanged.
Eigen::MatrixXd nearest_pd(const Eigen::MatrixXd& m, double eps_pd = kDefaultEpsPd);

double min_eigenvalue(const Eigen::MatrixXd& m);

DrugCovariance build_sigma_d(const CoprescriptionTable& table, SimilarityMethod method,
                             double eps_pd = kDefaultEpsPd);

DrugCovariance identity_sigma_d(std::size_t n_drugs);

// Square count matrix with a header row of labels and a label in the first
// column of every row.
CoprescriptionTable parse_coprescription(std::istream& in, std::int64_t n_total);
CoprescriptionTable load_coprescription(const std::filesystem::path& path,
                                        std::int64_t n_total);

// Reads a single integer from a one-line sidecar file.
std::int64_t load_n_total(const std::filesystem::path& path);

// Dense matrix CSV: one header line of labels, then one row of round-trip values
// per drug.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& labels);
Eigen::MatrixXd parse_matrix_csv(std::istream& in, std::vector<std::string>* labels = nullptr);
Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path,
                                std::vector<std::string>* labels = nullptr);

}  // namespace sslab
