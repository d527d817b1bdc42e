#pragma once

#include "sslab/core_data.hpp"
#include "sslab/prior_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace sslab {

// Linear predictors are clamped to [-kEtaClamp, kEtaClamp] before entering the
// binomial kernel; each clamp is counted when a counter is supplied.
inline constexpr double kEtaClamp = 35.0;

// log(1 + exp(x)) without overflow or loss of precision for large |x|.
double log1p_exp(double x);
double logistic(double x);

// Binomial log kernel y * eta - m * log(1 + exp(eta)). The log binomial
// coefficient is omitted since it does not depend on parameters; add it back
// when comparing against an external full likelihood.
double stratum_log_lik(std::int64_t y, std::int64_t m, double eta, long* clamps = nullptr);

// Default random-effect columns: drug-specific intercept and exposure slope.
std::vector<int> default_re_columns();

// Throws DomainError unless columns are strictly increasing design indices
// ending with the exposure column.
void validate_re_columns(std::span<const int> re_columns);

// x^T beta + sum_c x_c theta_{i,c} over the random-effect columns, where the
// exposure entry of theta_i is delta_i * gamma_{i,x}.
double linear_predictor(const Dataset& data, std::size_t record, const FixedEffects& beta,
                        const LatentEffects& effects, std::span<const int> re_columns);

double log_likelihood(const Dataset& data, const FixedEffects& beta,
                      const LatentEffects& effects, std::span<const int> re_columns);

// Score vectors: sum_ij (Y_ij - m_ij sigma(eta_ij)) x_ij, w.r.t. beta and
// w.r.t. gamma (N x q_re; the exposure column is zero for excluded drugs).
Eigen::VectorXd grad_log_likelihood_beta(const Dataset& data, const FixedEffects& beta,
                                         const LatentEffects& effects,
                                         std::span<const int> re_columns);
Eigen::MatrixXd grad_log_likelihood_gamma(const Dataset& data, const FixedEffects& beta,
                                          const LatentEffects& effects,
                                          std::span<const int> re_columns);

// Penalized pooled logistic fit of the fixed effects alone (all drug effects
// zero), by Newton's method with a Normal(0, prior_sd^2) ridge.
struct PooledFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd curvature;  // negative Hessian of the penalized log likelihood
  bool converged = false;
};
PooledFit fit_pooled_logistic(const Dataset& data, double prior_sd);

}  // namespace sslab
