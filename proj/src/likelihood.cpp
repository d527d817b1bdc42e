#include "sslab/likelihood.hpp"

#include "sslab/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace sslab {

double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stratum_log_lik(std::int64_t y, std::int64_t m, double eta, long* clamps) {
  if (m == 0) return 0.0;
  if (eta > kEtaClamp || eta < -kEtaClamp) {
    if (clamps) ++*clamps;
    eta = std::clamp(eta, -kEtaClamp, kEtaClamp);
  }
  return static_cast<double>(y) * eta - static_cast<double>(m) * log1p_exp(eta);
}

std::vector<int> default_re_columns() { return {kInterceptColumn, kExposureColumn}; }

void validate_re_columns(std::span<const int> cols) {
  if (cols.empty() || cols.back() != kExposureColumn)
    throw DomainError("random-effect columns must end with the exposure column");
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= kDesignDim)
      throw DomainError("random-effect column out of range");
    if (k > 0 && cols[k] <= cols[k - 1])
      throw DomainError("random-effect columns must be strictly increasing");
  }
}

namespace {

void check_dims(const Dataset& data, const FixedEffects& beta, const LatentEffects& effects,
                std::span<const int> re_columns) {
  validate_re_columns(re_columns);
  if (beta.beta.size() != kDesignDim) throw DimensionError("beta must have length 5");
  if (effects.gamma.rows() != data.n_drugs() ||
      effects.gamma.cols() != static_cast<Eigen::Index>(re_columns.size()) ||
      effects.delta.size() != static_cast<std::size_t>(data.n_drugs()))
    throw DimensionError("latent effects do not match the dataset / random-effect columns");
}

double random_part(const DesignVector& x, const LatentEffects& effects, int drug,
                   std::span<const int> re_columns) {
  const auto q = re_columns.size();
  double s = 0.0;
  for (std::size_t c = 0; c + 1 < q; ++c)
    s += x(re_columns[c]) * effects.gamma(drug, static_cast<Eigen::Index>(c));
  s += x(kExposureColumn) * effects.theta_x(drug);
  return s;
}

}  // namespace

double linear_predictor(const Dataset& data, std::size_t record, const FixedEffects& beta,
                        const LatentEffects& effects, std::span<const int> re_columns) {
  const auto& x = data.designs()[record];
  const int drug = data.records()[record].drug_id;
  return x.dot(beta.beta) + random_part(x, effects, drug, re_columns);
}

double log_likelihood(const Dataset& data, const FixedEffects& beta,
                      const LatentEffects& effects, std::span<const int> re_columns) {
  check_dims(data, beta, effects, re_columns);
  double ll = 0.0;
  const auto& recs = data.records();
  for (std::size_t r = 0; r < recs.size(); ++r)
    ll += stratum_log_lik(recs[r].n_events, recs[r].n_at_risk,
                          linear_predictor(data, r, beta, effects, re_columns));
  return ll;
}

Eigen::VectorXd grad_log_likelihood_beta(const Dataset& data, const FixedEffects& beta,
                                         const LatentEffects& effects,
                                         std::span<const int> re_columns) {
  check_dims(data, beta, effects, re_columns);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(kDesignDim);
  const auto& recs = data.records();
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const double eta = linear_predictor(data, r, beta, effects, re_columns);
    const double resid = static_cast<double>(recs[r].n_events) -
                         static_cast<double>(recs[r].n_at_risk) * logistic(eta);
    g += resid * data.designs()[r];
  }
  return g;
}

Eigen::MatrixXd grad_log_likelihood_gamma(const Dataset& data, const FixedEffects& beta,
                                          const LatentEffects& effects,
                                          std::span<const int> re_columns) {
  check_dims(data, beta, effects, re_columns);
  const auto q = static_cast<Eigen::Index>(re_columns.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(data.n_drugs(), q);
  const auto& recs = data.records();
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const int i = recs[r].drug_id;
    const auto& x = data.designs()[r];
    const double eta = linear_predictor(data, r, beta, effects, re_columns);
    const double resid = static_cast<double>(recs[r].n_events) -
                         static_cast<double>(recs[r].n_at_risk) * logistic(eta);
    for (Eigen::Index c = 0; c + 1 < q; ++c) g(i, c) += resid * x(re_columns[static_cast<std::size_t>(c)]);
    if (effects.delta[static_cast<std::size_t>(i)]) g(i, q - 1) += resid * x(kExposureColumn);
  }
  return g;
}

PooledFit fit_pooled_logistic(const Dataset& data, double prior_sd) {
  PooledFit fit;
  fit.beta = Eigen::VectorXd::Zero(kDesignDim);
  const auto& recs = data.records();
  std::int64_t events = 0, at_risk = 0;
  for (const auto& r : recs) {
    events += r.n_events;
    at_risk += r.n_at_risk;
  }
  if (at_risk > 0) {
    const double rate = (static_cast<double>(events) + 0.5) / (static_cast<double>(at_risk) + 1.0);
    fit.beta(kInterceptColumn) = std::log(rate / (1.0 - rate));
  }
  const double ridge = 1.0 / (prior_sd * prior_sd);
  auto objective = [&](const Eigen::VectorXd& b) {
    double ll = -0.5 * ridge * b.squaredNorm();
    for (std::size_t r = 0; r < recs.size(); ++r)
      ll += stratum_log_lik(recs[r].n_events, recs[r].n_at_risk, data.designs()[r].dot(b));
    return ll;
  };
  double current = objective(fit.beta);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd grad = -ridge * fit.beta;
    Eigen::MatrixXd hess = ridge * Eigen::MatrixXd::Identity(kDesignDim, kDesignDim);
    for (std::size_t r = 0; r < recs.size(); ++r) {
      const auto& x = data.designs()[r];
      const double p = logistic(std::clamp(x.dot(fit.beta), -kEtaClamp, kEtaClamp));
      const double m = static_cast<double>(recs[r].n_at_risk);
      grad += (static_cast<double>(recs[r].n_events) - m * p) * x;
      hess += m * p * (1.0 - p) * x * x.transpose();
    }
    fit.curvature = hess;
    const Eigen::VectorXd stepv = hess.ldlt().solve(grad);
    double scale = 1.0;
    Eigen::VectorXd next = fit.beta + stepv;
    double value = objective(next);
    while (value < current - 1e-12 && scale > 1e-8) {
      scale *= 0.5;
      next = fit.beta + scale * stepv;
      value = objective(next);
    }
    fit.beta = next;
    const bool small = (scale * stepv).lpNorm<Eigen::Infinity>() < 1e-10;
    current = value;
    if (small) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

}  // namespace sslab
