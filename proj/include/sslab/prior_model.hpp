#pragma once

#include "sslab/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace sslab {

// Fixed effects shared by all drugs, one per design column.
struct FixedEffects {
  Eigen::VectorXd beta;
};

// Latent per-drug effects. gamma has one row per drug and one column per
// random-effect design column; the exposure column is always the last one.
// The exposure effect actually entering the likelihood is delta_i * gamma_{i,x};
// the remaining columns enter as-is.
struct LatentEffects {
  Eigen::MatrixXd gamma;
  std::vector<std::uint8_t> delta;
  double pi = 0.5;

  int n_drugs() const { return static_cast<int>(gamma.rows()); }
  double theta_x(int i) const {
    return delta[static_cast<std::size_t>(i)] ? gamma(i, gamma.cols() - 1) : 0.0;
  }
};

// Log-Cholesky coordinates of the within-drug covariance: for each row of the
// lower factor L, the raw sub-diagonal entries followed by log L_rr.
struct WithinDrugCov {
  Eigen::VectorXd log_chol;
};

// Length of a log-Cholesky vector for a q x q matrix, and its inverse.
// log_chol_dim throws DimensionError if len is not triangular.
int log_chol_length(int q);
int log_chol_dim(Eigen::Index len);

Eigen::MatrixXd log_chol_to_factor(const Eigen::VectorXd& log_chol);
Eigen::MatrixXd log_chol_to_cov(const Eigen::VectorXd& log_chol);
Eigen::VectorXd factor_to_log_chol(const Eigen::MatrixXd& lower);
// Throws NumericError if cov is not positive definite.
Eigen::VectorXd cov_to_log_chol(const Eigen::MatrixXd& cov);

// Log density of the row-stacked vec(gamma) under N(0, Sigma_D (x) Sigma_gamma),
// from the two lower Cholesky factors. The Kronecker product is never formed:
// the quadratic form is ||L_D^{-1} gamma L_g^{-T}||_F^2.
double log_prior_gamma(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& sigma_d_chol,
                       const Eigen::MatrixXd& sigma_g_chol);

// d/d gamma of log_prior_gamma: -Sigma_D^{-1} gamma Sigma_gamma^{-1}.
Eigen::MatrixXd grad_log_prior_gamma(const Eigen::MatrixXd& gamma,
                                     const Eigen::MatrixXd& sigma_d_chol,
                                     const Eigen::MatrixXd& sigma_g_chol);

// L_D Z L_g^T with Z iid standard normal (N x q).
Eigen::MatrixXd sample_gamma_prior(Rng& rng, const Eigen::MatrixXd& sigma_d_chol,
                                   const Eigen::MatrixXd& sigma_g_chol);

struct HyperPrior {
  double pi_a = 1.0;
  double pi_b = 1.0;
  double log_chol_sd = 1.0;  // Normal(0, sd^2) on every log-Cholesky element
  double beta_sd = 10.0;     // Normal(0, sd^2) on every fixed effect
};

// Beta(a, b) log density at pi plus independent Normal(0, sd^2) log densities
// of the log-Cholesky elements. Throws DomainError unless 0 < pi < 1.
double log_prior_hyper(const Eigen::VectorXd& log_chol, double pi, double a, double b,
                       double log_chol_sd = 1.0);

// Among-drug factor of the prior, prepared once per run. Holds the Cholesky
// factor of Sigma_D, its log determinant, and the precision Sigma_D^{-1} as
// per-row neighbour lists (entries with |value| > 1e-14) so row-wise
// conditionals cost O(nnz) instead of O(N).
class KroneckerPrior {
 public:
  struct Neighbour {
    int index;
    double precision;
  };

  KroneckerPrior() = default;
  // Throws NumericError if sigma_d is not positive definite.
  explicit KroneckerPrior(const Eigen::MatrixXd& sigma_d);

  int n_drugs() const { return static_cast<int>(chol_.rows()); }
  const Eigen::MatrixXd& chol() const { return chol_; }
  double log_det() const { return log_det_; }
  double precision_diag(int i) const { return diag_[static_cast<std::size_t>(i)]; }
  const std::vector<Neighbour>& neighbours(int i) const {
    return off_[static_cast<std::size_t>(i)];
  }

  // Omega 1 and 1^T Omega 1.
  const Eigen::VectorXd& ones_precision() const { return ones_precision_; }
  double ones_quad() const { return ones_quad_; }

  // sum_{k != i} Omega_ik gamma_k  (a row vector of length q)
  Eigen::RowVectorXd neighbour_sum(int i, const Eigen::MatrixXd& gamma) const;

  // gamma^T Omega gamma  (q x q)
  Eigen::MatrixXd scatter(const Eigen::MatrixXd& gamma) const;

 private:
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  std::vector<double> diag_;
  std::vector<std::vector<Neighbour>> off_;
  Eigen::VectorXd ones_precision_;
  double ones_quad_ = 0.0;
};

}  // namespace sslab
