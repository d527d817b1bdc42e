#pragma once

#include "sslab/core_data.hpp"
#include "sslab/coprescription.hpp"
#include "sslab/likelihood.hpp"
#include "sslab/prior_model.hpp"
#include "sslab/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sslab {

enum class ProposalKind { random_walk, mala };

std::string_view to_string(ProposalKind k);
ProposalKind parse_proposal_kind(std::string_view name);

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 2000;
  int n_keep = 2000;
  int thin = 1;
  std::uint64_t seed = 20240611;
  double target_accept_rw = 0.234;
  double target_accept_mala = 0.574;
  ProposalKind proposal = ProposalKind::random_walk;
  std::vector<int> re_columns = default_re_columns();
  HyperPrior hyper;
  // Random-walk sub-steps on the log-Cholesky vector per iteration.
  int sigma_substeps = 5;
  // Hold beta (resp. Sigma_gamma) at its initial value. Used for toy problems
  // whose posterior is checked by quadrature.
  bool fix_beta = false;
  bool fix_sigma_gamma = false;
  std::optional<Eigen::VectorXd> initial_beta;
  std::optional<Eigen::VectorXd> initial_log_chol;
  unsigned max_threads = 1;

  double target_accept() const {
    return proposal == ProposalKind::mala ? target_accept_mala : target_accept_rw;
  }
  // Throws DomainError on invalid settings; returns non-fatal warnings.
  std::vector<std::string> validate() const;
};

// Everything that stays fixed during sampling: data, the among-drug prior
// factor, random-effect layout and hyperpriors. Built once and shared
// read-only by all chains. The dataset must outlive the model.
class Model {
 public:
  Model(const Dataset& data, const Eigen::MatrixXd& sigma_d, std::vector<int> re_columns,
        HyperPrior hyper);

  const Dataset& data() const { return *data_; }
  const KroneckerPrior& kron() const { return kron_; }
  const std::vector<int>& re_columns() const { return re_columns_; }
  const HyperPrior& hyper() const { return hyper_; }
  int n_drugs() const { return data_->n_drugs(); }
  int q_re() const { return static_cast<int>(re_columns_.size()); }
  // Random-effect design entries of a record (length q_re).
  const Eigen::VectorXd& re_design(std::size_t record) const { return re_design_[record]; }
  // Post-exposure records of a drug: the only ones affected by delta_i.
  std::span<const std::size_t> exposed_records(int drug) const {
    return exposed_[static_cast<std::size_t>(drug)];
  }

 private:
  const Dataset* data_;
  KroneckerPrior kron_;
  std::vector<int> re_columns_;
  HyperPrior hyper_;
  std::vector<Eigen::VectorXd> re_design_;
  std::vector<std::vector<std::size_t>> exposed_;
};

// Full MCMC state plus caches that the update functions keep consistent.
struct ModelState {
  FixedEffects beta;
  LatentEffects effects;
  WithinDrugCov sigma_gamma;

  Eigen::VectorXd eta_fixed;   // x^T beta, per record
  Eigen::VectorXd eta_random;  // x_re^T theta_i, per record
  Eigen::MatrixXd sigma_g_chol;
  Eigen::MatrixXd sigma_g_precision;
  double sigma_g_log_det = 0.0;
  long eta_clamps = 0;
};

ModelState make_state(const Model& model, Eigen::VectorXd beta, Eigen::MatrixXd gamma,
                      std::vector<std::uint8_t> delta, double pi, Eigen::VectorXd log_chol);

// Recomputes every cache from the primary fields.
void refresh_caches(const Model& model, ModelState& state);

// Unnormalized log joint density of (data, beta, gamma, delta, pi, log_chol),
// binomial coefficients omitted.
double log_posterior(const Model& model, const ModelState& state);

struct MhResult {
  double accept_prob = 0.0;
  bool accepted = false;
  Eigen::VectorXd proposal;
};

// Acceptance probability of a Metropolis-Hastings move given the log target
// at both points and the log proposal densities in both directions.
double mh_accept_prob(double log_target_current, double log_target_proposed,
                      double log_q_forward = 0.0, double log_q_backward = 0.0);

// Metropolis-Hastings update of beta. Proposals are shaped by
// (lik_curvature + I / beta_sd^2)^{-1}; pass an empty matrix for plain
// isotropic proposals.
MhResult update_beta(Rng& rng, const Model& model, ModelState& state, double step,
                     const Eigen::MatrixXd& lik_curvature, ProposalKind kind);

// Update of row i of gamma given everything else. The row's conditional prior
// is N(-c_i / Omega_ii, Sigma_gamma / Omega_ii) with c_i = sum_{k != i}
// Omega_ik gamma_k. When delta_i = 1 the whole row moves by one MH step.
// When delta_i = 0 the exposure entry does not touch the likelihood: the
// other entries take an MH step and the exposure entry is then drawn exactly
// from its Gaussian conditional. lik_curvature (q_re x q_re, may be empty)
// shapes the proposal together with the current prior precision.
MhResult update_gamma_row(Rng& rng, int i, const Model& model, ModelState& state,
                          double step, const Eigen::MatrixXd& lik_curvature,
                          ProposalKind kind);

// Exact Gibbs move along c -> (beta_o + c, gamma_{.,o} - c) for the
// non-exposure random-effect columns o. The likelihood is unchanged by the
// shift, so the conditional of c is Gaussian. Breaks the strong posterior
// coupling between the fixed intercept and the drug intercepts.
void update_location_shift(Rng& rng, const Model& model, ModelState& state);

// Log-likelihood change for drug i between theta_{i,x} = gamma_{i,x} and 0.
double delta_log_lik_gain(const Model& model, const ModelState& state, int i);

// Gibbs draw of delta_i with odds pi/(1-pi) * exp(gain). Returns Pr(delta_i = 1).
double update_delta(Rng& rng, int i, const Model& model, ModelState& state);

// Exact draw from Beta(a + sum(delta), b + N - sum(delta)).
double update_pi(Rng& rng, std::span<const std::uint8_t> delta, double a, double b);

// Random-walk MH on the log-Cholesky vector targeting log_prior_gamma(gamma |
// Sigma_D, Sigma_gamma(v)) + log_prior_hyper(v). `scatter` (gamma^T Omega_D
// gamma) may be passed when several sub-steps share it.
MhResult update_sigma_gamma(Rng& rng, const Model& model, ModelState& state, double step,
                            const Eigen::MatrixXd* scatter = nullptr);

// Log target used by update_sigma_gamma, exposed for tests.
double sigma_gamma_log_target(const Model& model, const Eigen::VectorXd& log_chol,
                              const Eigen::MatrixXd& scatter);

struct AcceptanceStats {
  double beta = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
};

// Kept draws of one chain, stored row-major by draw.
struct ChainDraws {
  int chain_id = 0;
  int thin = 1;
  int n_drugs = 0;
  int log_chol_len = 0;
  std::vector<double> beta;            // n_draws x kDesignDim
  std::vector<double> theta_x;         // n_draws x n_drugs; 0 whenever delta is 0
  std::vector<std::uint8_t> delta;     // n_draws x n_drugs
  std::vector<double> pi;
  std::vector<double> log_posterior;
  std::vector<double> log_chol;        // n_draws x log_chol_len

  AcceptanceStats warmup_acceptance;
  AcceptanceStats sampling_acceptance;
  // Per-warmup-iteration acceptance probabilities (sigma: mean over sub-steps).
  std::vector<double> warmup_beta_accept;
  std::vector<double> warmup_sigma_accept;
  double final_sigma_step = 0.0;
  double final_beta_step = 0.0;
  long eta_clamps = 0;

  std::size_t n_draws() const { return pi.size(); }
  double theta(std::size_t draw, int drug) const {
    return theta_x[draw * static_cast<std::size_t>(n_drugs) + static_cast<std::size_t>(drug)];
  }
  bool included(std::size_t draw, int drug) const {
    return delta[draw * static_cast<std::size_t>(n_drugs) + static_cast<std::size_t>(drug)] != 0;
  }
};

using PosteriorDraws = std::vector<ChainDraws>;

// One chain: warmup with Robbins-Monro step adaptation (frozen afterwards),
// then n_keep kept draws, one every `thin` iterations. Per iteration: beta,
// each gamma row, the location shift, each delta, pi, Sigma_gamma.
// Deterministic given (config.seed, chain_id).
ChainDraws run_chain(const SamplerConfig& config, const Model& model, int chain_id);

// n_chains independent chains on up to config.max_threads workers.
PosteriorDraws run_chains(const SamplerConfig& config, const Dataset& data,
                          const Eigen::MatrixXd& sigma_d);

}  // namespace sslab
