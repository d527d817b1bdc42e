#include "sslab/prior_model.hpp"

#include "sslab/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace sslab {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

int log_chol_length(int q) { return q * (q + 1) / 2; }

int log_chol_dim(Eigen::Index len) {
  int q = 0;
  while (log_chol_length(q) < len) ++q;
  if (log_chol_length(q) != len || len == 0)
    throw DimensionError("log-Cholesky vector length " + std::to_string(len) +
                         " is not q(q+1)/2");
  return q;
}

Eigen::MatrixXd log_chol_to_factor(const Eigen::VectorXd& v) {
  const int q = log_chol_dim(v.size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(q, q);
  Eigen::Index k = 0;
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c < r; ++c) l(r, c) = v(k++);
    l(r, r) = std::exp(v(k++));
  }
  return l;
}

Eigen::MatrixXd log_chol_to_cov(const Eigen::VectorXd& v) {
  const Eigen::MatrixXd l = log_chol_to_factor(v);
  return l * l.transpose();
}

Eigen::VectorXd factor_to_log_chol(const Eigen::MatrixXd& l) {
  const auto q = static_cast<int>(l.rows());
  Eigen::VectorXd v(log_chol_length(q));
  Eigen::Index k = 0;
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c < r; ++c) v(k++) = l(r, c);
    v(k++) = std::log(l(r, r));
  }
  return v;
}

Eigen::VectorXd cov_to_log_chol(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    throw DimensionError("covariance must be square and non-empty");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  return factor_to_log_chol(llt.matrixL());
}

namespace {

void check_prior_dims(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& ld,
                      const Eigen::MatrixXd& lg) {
  if (ld.rows() != ld.cols() || lg.rows() != lg.cols() || gamma.rows() != ld.rows() ||
      gamma.cols() != lg.rows())
    throw DimensionError("gamma must be N x q with N x N and q x q factors");
}

double log_det_from_chol(const Eigen::MatrixXd& l) {
  return 2.0 * l.diagonal().array().log().sum();
}

}  // namespace

double log_prior_gamma(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& sigma_d_chol,
                       const Eigen::MatrixXd& sigma_g_chol) {
  check_prior_dims(gamma, sigma_d_chol, sigma_g_chol);
  const auto n = static_cast<double>(gamma.rows());
  const auto q = static_cast<double>(gamma.cols());
  // A = L_D^{-1} gamma, then B = A L_g^{-T}  <=>  L_g B^T = A^T.
  const Eigen::MatrixXd a = sigma_d_chol.triangularView<Eigen::Lower>().solve(gamma);
  const Eigen::MatrixXd bt =
      sigma_g_chol.triangularView<Eigen::Lower>().solve(a.transpose());
  const double quad = bt.squaredNorm();
  return -0.5 * (n * q * kLog2Pi + q * log_det_from_chol(sigma_d_chol) +
                 n * log_det_from_chol(sigma_g_chol) + quad);
}

Eigen::MatrixXd grad_log_prior_gamma(const Eigen::MatrixXd& gamma,
                                     const Eigen::MatrixXd& sigma_d_chol,
                                     const Eigen::MatrixXd& sigma_g_chol) {
  check_prior_dims(gamma, sigma_d_chol, sigma_g_chol);
  // Sigma_D^{-1} gamma
  const auto ld = sigma_d_chol.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd left = ld.transpose().solve(ld.solve(gamma));
  // (Sigma_g^{-1} left^T)^T
  const auto lg = sigma_g_chol.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd right = lg.transpose().solve(lg.solve(left.transpose()));
  return -right.transpose();
}

Eigen::MatrixXd sample_gamma_prior(Rng& rng, const Eigen::MatrixXd& sigma_d_chol,
                                   const Eigen::MatrixXd& sigma_g_chol) {
  Eigen::MatrixXd z(sigma_d_chol.rows(), sigma_g_chol.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = std_normal(rng);
  return sigma_d_chol.triangularView<Eigen::Lower>() * z *
         sigma_g_chol.triangularView<Eigen::Lower>().transpose();
}

double log_prior_hyper(const Eigen::VectorXd& log_chol, double pi, double a, double b,
                       double log_chol_sd) {
  if (!(pi > 0.0 && pi < 1.0)) throw DomainError("pi must lie in (0, 1)");
  if (!(a > 0.0 && b > 0.0 && log_chol_sd > 0.0))
    throw DomainError("hyperprior parameters must be positive");
  const double log_beta_fn = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double lp = (a - 1.0) * std::log(pi) + (b - 1.0) * std::log1p(-pi) - log_beta_fn;
  const double var = log_chol_sd * log_chol_sd;
  lp += -0.5 * static_cast<double>(log_chol.size()) * (kLog2Pi + std::log(var)) -
        0.5 * log_chol.squaredNorm() / var;
  return lp;
}

KroneckerPrior::KroneckerPrior(const Eigen::MatrixXd& sigma_d) {
  if (sigma_d.rows() != sigma_d.cols() || sigma_d.rows() == 0)
    throw DimensionError("Sigma_D must be square and non-empty");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_d);
  if (llt.info() != Eigen::Success) throw NumericError("Sigma_D is not positive definite");
  chol_ = llt.matrixL();
  log_det_ = log_det_from_chol(chol_);
  const auto n = sigma_d.rows();
  const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(n, n));
  ones_precision_ = precision.rowwise().sum();
  ones_quad_ = ones_precision_.sum();
  diag_.resize(static_cast<std::size_t>(n));
  off_.assign(static_cast<std::size_t>(n), {});
  for (Eigen::Index i = 0; i < n; ++i) {
    diag_[static_cast<std::size_t>(i)] = precision(i, i);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == i) continue;
      const double v = 0.5 * (precision(i, k) + precision(k, i));
      if (std::abs(v) > 1e-14)
        off_[static_cast<std::size_t>(i)].push_back({static_cast<int>(k), v});
    }
  }
}

Eigen::RowVectorXd KroneckerPrior::neighbour_sum(int i, const Eigen::MatrixXd& gamma) const {
  Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(gamma.cols());
  for (const auto& nb : neighbours(i)) s.noalias() += nb.precision * gamma.row(nb.index);
  return s;
}

Eigen::MatrixXd KroneckerPrior::scatter(const Eigen::MatrixXd& gamma) const {
  const auto q = gamma.cols();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < n_drugs(); ++i) {
    Eigen::RowVectorXd row = diag_[static_cast<std::size_t>(i)] * gamma.row(i);
    row += neighbour_sum(i, gamma);
    s.noalias() += gamma.row(i).transpose() * row;
  }
  return 0.5 * (s + s.transpose());
}

}  // namespace sslab
