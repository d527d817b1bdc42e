#include "sslab/coprescription.hpp"

#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

namespace sslab {

void CoprescriptionTable::validate() const {
  const auto n = pair_counts.rows();
  if (pair_counts.cols() != n) throw ValidationError("co-prescription matrix is not square");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != n)
    throw ValidationError("label count does not match matrix size");
  if (n_total <= 0) throw ValidationError("n_total must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ni = pair_counts(i, i);
    if (ni < 0 || ni > n_total)
      throw ValidationError("drug " + std::to_string(i) + ": marginal count outside [0, n_total]");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (pair_counts(i, j) != pair_counts(j, i))
        throw ValidationError("co-prescription matrix is not symmetric at (" +
                              std::to_string(i) + ", " + std::to_string(j) + ")");
      if (i != j && (pair_counts(i, j) < 0 ||
                     pair_counts(i, j) > std::min(ni, pair_counts(j, j))))
        throw ValidationError("pair count (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") exceeds a marginal");
    }
  }
}

std::string_view to_string(SimilarityMethod m) {
  switch (m) {
    case SimilarityMethod::conditional: return "conditional";
    case SimilarityMethod::pearson: return "pearson";
    case SimilarityMethod::tetrachoric: return "tetrachoric";
    case SimilarityMethod::identity: return "identity";
  }
  return "identity";
}

SimilarityMethod parse_similarity_method(std::string_view name) {
  if (name == "conditional") return SimilarityMethod::conditional;
  if (name == "pearson") return SimilarityMethod::pearson;
  if (name == "tetrachoric") return SimilarityMethod::tetrachoric;
  if (name == "identity") return SimilarityMethod::identity;
  throw DomainError("unknown similarity method '" + std::string(name) + "'");
}

double conditional_similarity(std::int64_t n_ab, std::int64_t n_a, std::int64_t n_b) {
  if (n_a <= 0 || n_b <= 0) throw UndefinedSimilarity("conditional similarity: zero marginal");
  if (n_ab < 0 || n_ab > std::min(n_a, n_b))
    throw DomainError("conditional similarity: joint count exceeds a marginal");
  const double ab = static_cast<double>(n_ab);
  return 0.5 * (ab / static_cast<double>(n_a) + ab / static_cast<double>(n_b));
}

double pearson_binary(std::int64_t n, std::int64_t n_a, std::int64_t n_b, std::int64_t n_ab) {
  if (n <= 0 || n_a <= 0 || n_a >= n || n_b <= 0 || n_b >= n)
    throw UndefinedSimilarity("pearson: degenerate marginal");
  const double nn = static_cast<double>(n);
  const double pa = static_cast<double>(n_a) / nn;
  const double pb = static_cast<double>(n_b) / nn;
  const double pab = static_cast<double>(n_ab) / nn;
  const double r = (pab - pa * pb) / std::sqrt(pa * (1.0 - pa) * pb * (1.0 - pb));
  return std::clamp(r, -1.0, 1.0);
}

double tetrachoric_approx(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
  if (a < 0 || b < 0 || c < 0 || d < 0) throw DomainError("tetrachoric: negative cell count");
  // Products in double: counts near 1e8 would overflow int64 products.
  const double ad = static_cast<double>(a) * static_cast<double>(d);
  const double bc = static_cast<double>(b) * static_cast<double>(c);
  if (bc == 0.0) return ad > 0.0 ? 1.0 : 0.0;
  if (ad == 0.0) return -1.0;
  return std::cos(std::numbers::pi / (1.0 + std::sqrt(ad / bc)));
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd nearest_pd(const Eigen::MatrixXd& m, double eps_pd) {
  if (m.rows() != m.cols()) throw DimensionError("nearest_pd: matrix is not square");
  if (!(eps_pd > 0.0)) throw DomainError("nearest_pd: eps_pd must be positive");
  if (!m.allFinite()) throw NumericError("nearest_pd: non-finite entries");
  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  constexpr int kMaxRounds = 50;
  for (int round = 0; round < kMaxRounds; ++round) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
    const double lo = es.eigenvalues().minCoeff();
    if (lo >= eps_pd * (1.0 - 1e-6)) return a;
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(eps_pd);
    a = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd inv_sd = a.diagonal().cwiseSqrt().cwiseInverse();
    a = inv_sd.asDiagonal() * a * inv_sd.asDiagonal();
    a = (0.5 * (a + a.transpose())).eval();
    a.diagonal().setOnes();
  }
  return a;
}

DrugCovariance identity_sigma_d(std::size_t n_drugs) {
  DrugCovariance out;
  const auto n = static_cast<Eigen::Index>(n_drugs);
  out.matrix = Eigen::MatrixXd::Identity(n, n);
  out.method = SimilarityMethod::identity;
  return out;
}

DrugCovariance build_sigma_d(const CoprescriptionTable& table, SimilarityMethod method,
                             double eps_pd) {
  if (table.n_drugs() == 0) throw EmptyInputError("co-prescription table has no drugs");
  if (!(eps_pd > 0.0)) throw DomainError("eps_pd must be positive");
  if (method == SimilarityMethod::identity) {
    auto out = identity_sigma_d(table.n_drugs());
    out.eps_pd = eps_pd;
    return out;
  }
  table.validate();
  const auto n = static_cast<Eigen::Index>(table.n_drugs());
  const auto& c = table.pair_counts;
  Eigen::MatrixXd raw = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const std::int64_t ni = c(i, i), nj = c(j, j), nij = c(i, j);
      double v = 0.0;
      try {
        switch (method) {
          case SimilarityMethod::conditional:
            v = conditional_similarity(nij, ni, nj);
            break;
          case SimilarityMethod::pearson:
            v = pearson_binary(table.n_total, ni, nj, nij);
            break;
          case SimilarityMethod::tetrachoric:
            v = tetrachoric_approx(nij, ni - nij, nj - nij, table.n_total - ni - nj + nij);
            break;
          case SimilarityMethod::identity:
            break;
        }
      } catch (const UndefinedSimilarity&) {
        v = 0.0;
      }
      raw(i, j) = raw(j, i) = v;
    }
  }
  DrugCovariance out;
  out.method = method;
  out.eps_pd = eps_pd;
  out.min_eigenvalue_raw = min_eigenvalue(raw);
  if (out.min_eigenvalue_raw < eps_pd) {
    out.matrix = nearest_pd(raw, eps_pd);
    out.repaired = true;
    out.min_eigenvalue = min_eigenvalue(out.matrix);
  } else {
    out.matrix = std::move(raw);
    out.min_eigenvalue = out.min_eigenvalue_raw;
  }
  return out;
}

namespace {

std::int64_t parse_count(const std::string& s, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("not an integer count: '" + s + "'", line);
  return v;
}

double parse_real(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + s + "'", line);
  }
}

}  // namespace

CoprescriptionTable parse_coprescription(std::istream& in, std::int64_t n_total) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty co-prescription file", 0);
  ++line_no;
  auto header = io::split_csv_line(line);
  if (header.size() < 2) throw ParseError("header needs at least one drug label", 1);
  CoprescriptionTable t;
  t.n_total = n_total;
  t.labels.assign(header.begin() + 1, header.end());
  const auto n = static_cast<Eigen::Index>(t.labels.size());
  t.pair_counts = CountMatrix::Zero(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_csv_line(line);
    if (static_cast<Eigen::Index>(f.size()) != n + 1)
      throw ParseError("expected " + std::to_string(n + 1) + " columns", line_no);
    if (row >= n) throw ParseError("more rows than header labels", line_no);
    if (f[0] != t.labels[static_cast<std::size_t>(row)])
      throw ParseError("row label '" + f[0] + "' does not match column order", line_no);
    for (Eigen::Index j = 0; j < n; ++j)
      t.pair_counts(row, j) = parse_count(f[static_cast<std::size_t>(j + 1)], line_no);
    ++row;
  }
  if (row != n) throw ParseError("matrix has " + std::to_string(row) + " rows, expected " +
                                     std::to_string(n), line_no);
  t.validate();
  return t;
}

CoprescriptionTable load_coprescription(const std::filesystem::path& path,
                                        std::int64_t n_total) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open co-prescription file " + path.string());
  return parse_coprescription(in, n_total);
}

std::int64_t load_n_total(const std::filesystem::path& path) {
  std::string text = io::read_text(path);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return parse_count(text, 1);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& labels) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) out << ',';
    if (static_cast<std::size_t>(j) < labels.size())
      out << labels[static_cast<std::size_t>(j)];
    else
      out << "d" << j;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << io::format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd parse_matrix_csv(std::istream& in, std::vector<std::string>* labels) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty matrix file", 0);
  ++line_no;
  const auto header = io::split_csv_line(line);
  const auto n = static_cast<Eigen::Index>(header.size());
  Eigen::MatrixXd m(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_csv_line(line);
    if (static_cast<Eigen::Index>(f.size()) != n || row >= n)
      throw ParseError("matrix row has wrong shape", line_no);
    for (Eigen::Index j = 0; j < n; ++j) m(row, j) = parse_real(f[static_cast<std::size_t>(j)], line_no);
    ++row;
  }
  if (row != n) throw ParseError("matrix is not square", line_no);
  if (labels) *labels = header;
  return m;
}

Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path,
                                std::vector<std::string>* labels) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file " + path.string());
  return parse_matrix_csv(in, labels);
}

}  // namespace sslab
