#include "sslab/sampler.hpp"

#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sslab {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMinLogStep = -9.2;  // ~1e-4
constexpr double kMaxLogStep = 4.6;   // ~1e2
}  // namespace

std::string_view to_string(ProposalKind k) {
  return k == ProposalKind::mala ? "mala" : "random_walk";
}

ProposalKind parse_proposal_kind(std::string_view name) {
  if (name == "random_walk" || name == "rw") return ProposalKind::random_walk;
  if (name == "mala") return ProposalKind::mala;
  throw DomainError("unknown proposal kind '" + std::string(name) + "'");
}

std::vector<std::string> SamplerConfig::validate() const {
  if (n_chains < 1) throw DomainError("n_chains must be >= 1");
  if (n_warmup < 0) throw DomainError("n_warmup must be >= 0");
  if (n_keep < 1) throw DomainError("n_keep must be >= 1");
  if (thin < 1) throw DomainError("thin must be >= 1");
  if (sigma_substeps < 0) throw DomainError("sigma_substeps must be >= 0");
  if (!(target_accept_rw > 0 && target_accept_rw < 1 && target_accept_mala > 0 &&
        target_accept_mala < 1))
    throw DomainError("target acceptance rates must lie in (0, 1)");
  validate_re_columns(re_columns);
  std::vector<std::string> warnings;
  if (n_keep < 100) warnings.push_back("n_keep < 100: selection results will be noisy");
  return warnings;
}

Model::Model(const Dataset& data, const Eigen::MatrixXd& sigma_d, std::vector<int> re_columns,
             HyperPrior hyper)
    : data_(&data), re_columns_(std::move(re_columns)), hyper_(hyper) {
  validate_re_columns(re_columns_);
  if (sigma_d.rows() != data.n_drugs() || sigma_d.cols() != data.n_drugs())
    throw DimensionError("Sigma_D is " + std::to_string(sigma_d.rows()) + "x" +
                         std::to_string(sigma_d.cols()) + " but the dataset has " +
                         std::to_string(data.n_drugs()) + " drugs");
  kron_ = KroneckerPrior(sigma_d);
  const auto& recs = data.records();
  re_design_.reserve(recs.size());
  exposed_.assign(static_cast<std::size_t>(data.n_drugs()), {});
  for (std::size_t r = 0; r < recs.size(); ++r) {
    Eigen::VectorXd v(q_re());
    for (int c = 0; c < q_re(); ++c) v(c) = data.designs()[r](re_columns_[static_cast<std::size_t>(c)]);
    re_design_.push_back(std::move(v));
    if (recs[r].post_exposure) exposed_[static_cast<std::size_t>(recs[r].drug_id)].push_back(r);
  }
}

namespace {

void refresh_sigma(ModelState& s) {
  s.sigma_g_chol = log_chol_to_factor(s.sigma_gamma.log_chol);
  const auto q = s.sigma_g_chol.rows();
  const Eigen::MatrixXd linv =
      s.sigma_g_chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(q, q));
  s.sigma_g_precision = linv.transpose() * linv;
  s.sigma_g_log_det = 2.0 * s.sigma_g_chol.diagonal().array().log().sum();
}

double random_eta(const Model& model, const ModelState& s, std::size_t r, int drug) {
  const auto& red = model.re_design(r);
  const int q = model.q_re();
  double v = 0.0;
  for (int c = 0; c + 1 < q; ++c) v += red(c) * s.effects.gamma(drug, c);
  if (s.effects.delta[static_cast<std::size_t>(drug)]) v += red(q - 1) * s.effects.gamma(drug, q - 1);
  return v;
}

void refresh_drug_eta(const Model& model, ModelState& s, int drug) {
  for (std::size_t r : model.data().records_of(drug))
    s.eta_random(static_cast<Eigen::Index>(r)) = random_eta(model, s, r, drug);
}

// Proposal shape from a precision matrix P = R R^T: draws R^{-T} z, applies
// P^{-1}, and evaluates v^T P v.
class Shape {
 public:
  explicit Shape(const Eigen::MatrixXd& precision) : llt_(precision) {
    if (llt_.info() != Eigen::Success) {
      llt_.compute(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
    }
  }
  Eigen::VectorXd sample(const Eigen::VectorXd& z) const {
    return llt_.matrixU().solve(z);
  }
  Eigen::VectorXd apply_cov(const Eigen::VectorXd& g) const { return llt_.solve(g); }
  double quad(const Eigen::VectorXd& v) const {
    return (llt_.matrixU() * v).squaredNorm();
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

template <class Target>
MhResult mh_step(Rng& rng, const Eigen::VectorXd& x, Target&& target, double step,
                 const Shape& shape, ProposalKind kind) {
  const bool mala = kind == ProposalKind::mala;
  Eigen::VectorXd gx;
  const double lx = target(x, mala ? &gx : nullptr);
  if (!std::isfinite(lx)) throw NumericError("non-finite log posterior at current state");
  Eigen::VectorXd z(x.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = std_normal(rng);
  const double u = uniform01(rng);
  MhResult res;
  if (step == 0.0) {
    res.accept_prob = 1.0;
    res.accepted = true;
    res.proposal = x;
    return res;
  }
  const Eigen::VectorXd noise = shape.sample(z);
  if (mala) {
    const double h2 = step * step;
    const Eigen::VectorXd mean_x = x + 0.5 * h2 * shape.apply_cov(gx);
    res.proposal = mean_x + step * noise;
    Eigen::VectorXd gy;
    const double ly = target(res.proposal, &gy);
    if (std::isfinite(ly) && gy.allFinite()) {
      const Eigen::VectorXd mean_y = res.proposal + 0.5 * h2 * shape.apply_cov(gy);
      const double log_fwd = -0.5 * shape.quad(res.proposal - mean_x) / h2;
      const double log_bwd = -0.5 * shape.quad(x - mean_y) / h2;
      res.accept_prob = mh_accept_prob(lx, ly, log_fwd, log_bwd);
    } else {
      res.accept_prob = 0.0;
    }
  } else {
    res.proposal = x + step * noise;
    res.accept_prob = mh_accept_prob(lx, target(res.proposal, nullptr));
  }
  res.accepted = u < res.accept_prob;
  return res;
}

}  // namespace

ModelState make_state(const Model& model, Eigen::VectorXd beta, Eigen::MatrixXd gamma,
                      std::vector<std::uint8_t> delta, double pi, Eigen::VectorXd log_chol) {
  ModelState s;
  s.beta.beta = std::move(beta);
  s.effects.gamma = std::move(gamma);
  s.effects.delta = std::move(delta);
  s.effects.pi = pi;
  s.sigma_gamma.log_chol = std::move(log_chol);
  if (s.beta.beta.size() != kDesignDim) throw DimensionError("beta must have length 5");
  if (s.effects.gamma.rows() != model.n_drugs() || s.effects.gamma.cols() != model.q_re() ||
      s.effects.delta.size() != static_cast<std::size_t>(model.n_drugs()))
    throw DimensionError("latent effects do not match the model");
  if (log_chol_dim(s.sigma_gamma.log_chol.size()) != model.q_re())
    throw DimensionError("log-Cholesky vector does not match the random-effect dimension");
  refresh_caches(model, s);
  return s;
}

void refresh_caches(const Model& model, ModelState& s) {
  const auto& data = model.data();
  const auto n_rec = static_cast<Eigen::Index>(data.records().size());
  s.eta_fixed.resize(n_rec);
  s.eta_random.resize(n_rec);
  for (Eigen::Index r = 0; r < n_rec; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    s.eta_fixed(r) = data.designs()[ru].dot(s.beta.beta);
    s.eta_random(r) = random_eta(model, s, ru, data.records()[ru].drug_id);
  }
  refresh_sigma(s);
}

double log_posterior(const Model& model, const ModelState& s) {
  const auto& recs = model.data().records();
  double ll = 0.0;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    ll += stratum_log_lik(recs[r].n_events, recs[r].n_at_risk, s.eta_fixed(ri) + s.eta_random(ri));
  }
  const double sd = model.hyper().beta_sd;
  const double lp_beta = -0.5 * static_cast<double>(kDesignDim) * (kLog2Pi + 2.0 * std::log(sd)) -
                         0.5 * s.beta.beta.squaredNorm() / (sd * sd);
  const auto n = static_cast<double>(model.n_drugs());
  const auto q = static_cast<double>(model.q_re());
  const Eigen::MatrixXd scatter = model.kron().scatter(s.effects.gamma);
  const double lp_gamma =
      -0.5 * (n * q * kLog2Pi + q * model.kron().log_det() + n * s.sigma_g_log_det +
              (s.sigma_g_precision.cwiseProduct(scatter)).sum());
  const double k = std::accumulate(s.effects.delta.begin(), s.effects.delta.end(), 0.0);
  const double pi = s.effects.pi;
  const double lp_delta = k * std::log(pi) + (n - k) * std::log1p(-pi);
  const auto& h = model.hyper();
  return ll + lp_beta + lp_gamma + lp_delta +
         log_prior_hyper(s.sigma_gamma.log_chol, pi, h.pi_a, h.pi_b, h.log_chol_sd);
}

double mh_accept_prob(double log_target_current, double log_target_proposed, double log_q_forward,
                      double log_q_backward) {
  if (!std::isfinite(log_target_proposed)) return 0.0;
  const double r = log_target_proposed - log_target_current + log_q_backward - log_q_forward;
  if (std::isnan(r)) return 0.0;
  return r >= 0.0 ? 1.0 : std::exp(r);
}

MhResult update_beta(Rng& rng, const Model& model, ModelState& s, double step,
                     const Eigen::MatrixXd& lik_curvature, ProposalKind kind) {
  const auto& data = model.data();
  const auto& recs = data.records();
  const double var = model.hyper().beta_sd * model.hyper().beta_sd;
  auto target = [&](const Eigen::VectorXd& b, Eigen::VectorXd* grad) {
    double lp = -0.5 * b.squaredNorm() / var;
    if (grad) *grad = -b / var;
    for (std::size_t r = 0; r < recs.size(); ++r) {
      const auto& x = data.designs()[r];
      const double eta = x.dot(b) + s.eta_random(static_cast<Eigen::Index>(r));
      lp += stratum_log_lik(recs[r].n_events, recs[r].n_at_risk, eta);
      if (grad) {
        const double p = logistic(std::clamp(eta, -kEtaClamp, kEtaClamp));
        *grad += (static_cast<double>(recs[r].n_events) -
                  static_cast<double>(recs[r].n_at_risk) * p) * x;
      }
    }
    return lp;
  };
  Eigen::MatrixXd precision;
  if (lik_curvature.size() == 0) {
    precision = Eigen::MatrixXd::Identity(kDesignDim, kDesignDim);
  } else {
    precision = lik_curvature;
    precision.diagonal().array() += 1.0 / var;
  }
  MhResult res = mh_step(rng, s.beta.beta, target, step, Shape(precision), kind);
  if (res.accepted) {
    s.beta.beta = res.proposal;
    for (std::size_t r = 0; r < recs.size(); ++r)
      s.eta_fixed(static_cast<Eigen::Index>(r)) = data.designs()[r].dot(s.beta.beta);
  }
  return res;
}

MhResult update_gamma_row(Rng& rng, int i, const Model& model, ModelState& s, double step,
                          const Eigen::MatrixXd& lik_curvature, ProposalKind kind) {
  const int q = model.q_re();
  const int xcol = q - 1;
  const auto& recs = model.data().records();
  const auto rows = model.data().records_of(i);
  const double omega = model.kron().precision_diag(i);
  const Eigen::VectorXd c = model.kron().neighbour_sum(i, s.effects.gamma).transpose();
  const Eigen::MatrixXd& lambda = s.sigma_g_precision;
  const bool included = s.effects.delta[static_cast<std::size_t>(i)] != 0;

  // Log conditional of the full row g (likelihood + row prior) and its gradient.
  auto row_target = [&](const Eigen::VectorXd& g, Eigen::VectorXd* grad) {
    const Eigen::VectorXd lg = lambda * g;
    double lp = -0.5 * omega * g.dot(lg) - g.dot(lambda * c);
    if (grad) *grad = -omega * lg - lambda * c;
    for (std::size_t r : rows) {
      const auto& red = model.re_design(r);
      double eta = s.eta_fixed(static_cast<Eigen::Index>(r));
      for (int k = 0; k < xcol; ++k) eta += red(k) * g(k);
      if (included) eta += red(xcol) * g(xcol);
      lp += stratum_log_lik(recs[r].n_events, recs[r].n_at_risk, eta);
      if (grad) {
        const double resid = static_cast<double>(recs[r].n_events) -
                             static_cast<double>(recs[r].n_at_risk) *
                                 logistic(std::clamp(eta, -kEtaClamp, kEtaClamp));
        for (int k = 0; k < xcol; ++k) (*grad)(k) += resid * red(k);
        if (included) (*grad)(xcol) += resid * red(xcol);
      }
    }
    return lp;
  };

  const Eigen::VectorXd current = s.effects.gamma.row(i).transpose();
  MhResult res;
  if (included) {
    Eigen::MatrixXd precision = omega * lambda;
    if (lik_curvature.size() != 0) precision += lik_curvature;
    res = mh_step(rng, current, row_target, step, Shape(precision), kind);
    if (res.accepted) s.effects.gamma.row(i) = res.proposal.transpose();
  } else {
    if (xcol > 0) {
      const double gx = current(xcol);
      auto sub_target = [&](const Eigen::VectorXd& o, Eigen::VectorXd* grad) {
        Eigen::VectorXd g(q);
        g.head(xcol) = o;
        g(xcol) = gx;
        if (!grad) return row_target(g, nullptr);
        Eigen::VectorXd full;
        const double lp = row_target(g, &full);
        *grad = full.head(xcol);
        return lp;
      };
      Eigen::MatrixXd precision = omega * lambda.topLeftCorner(xcol, xcol);
      if (lik_curvature.size() != 0) precision += lik_curvature.topLeftCorner(xcol, xcol);
      res = mh_step(rng, current.head(xcol), sub_target, step, Shape(precision), kind);
      if (res.accepted) s.effects.gamma.row(i).head(xcol) = res.proposal.transpose();
    } else {
      res.accept_prob = 1.0;
      res.accepted = true;
    }
    // Exact draw of the excluded exposure entry from its Gaussian conditional.
    const Eigen::VectorXd mu = -c / omega;
    const Eigen::VectorXd g = s.effects.gamma.row(i).transpose();
    double mean = mu(xcol);
    for (int k = 0; k < xcol; ++k) mean -= lambda(xcol, k) * (g(k) - mu(k)) / lambda(xcol, xcol);
    const double sd = 1.0 / std::sqrt(omega * lambda(xcol, xcol));
    s.effects.gamma(i, xcol) = mean + sd * std_normal(rng);
  }
  refresh_drug_eta(model, s, i);
  return res;
}

void update_location_shift(Rng& rng, const Model& model, ModelState& s) {
  const int no = model.q_re() - 1;
  if (no == 0) return;
  const auto& kron = model.kron();
  const double prec_beta = 1.0 / (model.hyper().beta_sd * model.hyper().beta_sd);
  const Eigen::MatrixXd& lambda = s.sigma_g_precision;
  const Eigen::VectorXd t = lambda * (s.effects.gamma.transpose() * kron.ones_precision());
  Eigen::MatrixXd a = kron.ones_quad() * lambda.topLeftCorner(no, no);
  a.diagonal().array() += prec_beta;
  Eigen::VectorXd b(no);
  for (int k = 0; k < no; ++k)
    b(k) = t(k) - prec_beta * s.beta.beta(model.re_columns()[static_cast<std::size_t>(k)]);
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("location shift precision is not positive definite");
  Eigen::VectorXd z(no);
  for (int k = 0; k < no; ++k) z(k) = std_normal(rng);
  const Eigen::VectorXd c = llt.solve(b) + llt.matrixU().solve(z);
  for (int k = 0; k < no; ++k) {
    s.beta.beta(model.re_columns()[static_cast<std::size_t>(k)]) += c(k);
    s.effects.gamma.col(k).array() -= c(k);
  }
  refresh_caches(model, s);
}

double delta_log_lik_gain(const Model& model, const ModelState& s, int i) {
  const int q = model.q_re();
  const auto& recs = model.data().records();
  double gain = 0.0;
  for (std::size_t r : model.exposed_records(i)) {
    const auto& red = model.re_design(r);
    double base = s.eta_fixed(static_cast<Eigen::Index>(r));
    for (int k = 0; k + 1 < q; ++k) base += red(k) * s.effects.gamma(i, k);
    const double with = base + red(q - 1) * s.effects.gamma(i, q - 1);
    gain += stratum_log_lik(recs[r].n_events, recs[r].n_at_risk, with) -
            stratum_log_lik(recs[r].n_events, recs[r].n_at_risk, base);
  }
  return gain;
}

double update_delta(Rng& rng, int i, const Model& model, ModelState& s) {
  const double pi = s.effects.pi;
  const double logit = std::log(pi) - std::log1p(-pi) + delta_log_lik_gain(model, s, i);
  const double p = logistic(logit);
  const std::uint8_t next = uniform01(rng) < p ? 1 : 0;
  auto& d = s.effects.delta[static_cast<std::size_t>(i)];
  if (next != d) {
    d = next;
    refresh_drug_eta(model, s, i);
  }
  return p;
}

double update_pi(Rng& rng, std::span<const std::uint8_t> delta, double a, double b) {
  double k = 0.0;
  for (auto d : delta) k += d ? 1.0 : 0.0;
  return beta_draw(rng, a + k, b + static_cast<double>(delta.size()) - k);
}

double sigma_gamma_log_target(const Model& model, const Eigen::VectorXd& log_chol,
                              const Eigen::MatrixXd& scatter) {
  const Eigen::MatrixXd l = log_chol_to_factor(log_chol);
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(scatter);
  const Eigen::MatrixXd b = l.triangularView<Eigen::Lower>().solve(a.transpose());
  const auto n = static_cast<double>(model.n_drugs());
  return -0.5 * (n * log_det + b.trace()) +
         log_prior_hyper(log_chol, 0.5, 1.0, 1.0, model.hyper().log_chol_sd);
}

MhResult update_sigma_gamma(Rng& rng, const Model& model, ModelState& s, double step,
                            const Eigen::MatrixXd* scatter) {
  Eigen::MatrixXd local;
  if (!scatter) {
    local = model.kron().scatter(s.effects.gamma);
    scatter = &local;
  }
  auto target = [&](const Eigen::VectorXd& v, Eigen::VectorXd*) {
    return sigma_gamma_log_target(model, v, *scatter);
  };
  const auto len = s.sigma_gamma.log_chol.size();
  MhResult res = mh_step(rng, s.sigma_gamma.log_chol, target, step,
                         Shape(Eigen::MatrixXd::Identity(len, len)), ProposalKind::random_walk);
  if (res.accepted) {
    s.sigma_gamma.log_chol = res.proposal;
    refresh_sigma(s);
  }
  return res;
}

namespace {

struct StepAdapter {
  double log_step;
  double target;
  long count = 0;

  void update(double accept_prob) {
    ++count;
    log_step += (accept_prob - target) / std::pow(static_cast<double>(count), 0.6);
    log_step = std::clamp(log_step, kMinLogStep, kMaxLogStep);
  }
  double step() const { return std::exp(log_step); }
};

}  // namespace

ChainDraws run_chain(const SamplerConfig& cfg, const Model& model, int chain_id) {
  Rng rng = make_rng(cfg.seed, "chain", static_cast<std::uint64_t>(chain_id));
  const auto& data = model.data();
  const auto& recs = data.records();
  const int n = model.n_drugs();
  const int q = model.q_re();
  const bool mala = cfg.proposal == ProposalKind::mala;

  Eigen::VectorXd beta0;
  if (cfg.initial_beta) {
    beta0 = *cfg.initial_beta;
  } else {
    const PooledFit fit = fit_pooled_logistic(data, model.hyper().beta_sd);
    beta0 = fit.beta;
    if (!cfg.fix_beta) {
      Eigen::VectorXd z(kDesignDim);
      for (int k = 0; k < kDesignDim; ++k) z(k) = std_normal(rng);
      beta0 += 2.0 * Shape(fit.curvature).sample(z);
    }
  }
  Eigen::MatrixXd gamma0(n, q);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < q; ++k) gamma0(i, k) = 0.1 * std_normal(rng);
  std::vector<std::uint8_t> delta0(static_cast<std::size_t>(n));
  for (auto& d : delta0) d = uniform01(rng) < 0.5 ? 1 : 0;
  Eigen::VectorXd log_chol0;
  if (cfg.initial_log_chol) {
    log_chol0 = *cfg.initial_log_chol;
  } else {
    log_chol0 = factor_to_log_chol(0.5 * Eigen::MatrixXd::Identity(q, q));
  }
  ModelState s = make_state(model, beta0, gamma0, delta0, 0.5, log_chol0);

  const double target = cfg.target_accept();
  StepAdapter beta_step{std::log(mala ? 0.8 : 2.38 / std::sqrt(double(kDesignDim))), target};
  const StepAdapter row_joint{std::log(mala ? 0.8 : 2.38 / std::sqrt(double(q))), target};
  const StepAdapter row_partial{
      std::log(mala ? 0.8 : 2.38 / std::sqrt(double(std::max(1, q - 1)))), target};
  std::vector<StepAdapter> joint_steps(static_cast<std::size_t>(n), row_joint);
  std::vector<StepAdapter> partial_steps(static_cast<std::size_t>(n), row_partial);
  StepAdapter sigma_step{std::log(0.1), cfg.target_accept_rw};

  Eigen::MatrixXd beta_curv;
  std::vector<Eigen::MatrixXd> row_curv(static_cast<std::size_t>(n));
  auto refresh_curvature = [&] {
    beta_curv = Eigen::MatrixXd::Zero(kDesignDim, kDesignDim);
    for (auto& m : row_curv) m = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t r = 0; r < recs.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double p = logistic(std::clamp(s.eta_fixed(ri) + s.eta_random(ri), -kEtaClamp, kEtaClamp));
      const double w = static_cast<double>(recs[r].n_at_risk) * p * (1.0 - p);
      const auto& x = data.designs()[r];
      beta_curv.noalias() += w * x * x.transpose();
      const auto& red = model.re_design(r);
      row_curv[static_cast<std::size_t>(recs[r].drug_id)].noalias() += w * red * red.transpose();
    }
  };

  ChainDraws out;
  out.chain_id = chain_id;
  out.thin = cfg.thin;
  out.n_drugs = n;
  out.log_chol_len = log_chol_length(q);
  const auto n_store = static_cast<std::size_t>(cfg.n_keep);
  out.beta.reserve(n_store * kDesignDim);
  out.theta_x.reserve(n_store * static_cast<std::size_t>(n));
  out.delta.reserve(n_store * static_cast<std::size_t>(n));
  out.pi.reserve(n_store);
  out.log_posterior.reserve(n_store);
  out.log_chol.reserve(n_store * static_cast<std::size_t>(out.log_chol_len));

  const int warmup = cfg.n_warmup;
  const long total = warmup + static_cast<long>(cfg.n_keep) * cfg.thin;
  AcceptanceStats warm_sum, keep_sum;
  for (long t = 0; t < total; ++t) {
    const bool warm = t < warmup;
    if (t == 0 || (warm && (t == warmup / 4 || t == warmup / 2))) refresh_curvature();
    double a_beta = 1.0, a_gamma = 0.0, a_sigma = 1.0;
    try {
      if (!cfg.fix_beta) {
        a_beta = update_beta(rng, model, s, beta_step.step(), beta_curv, cfg.proposal).accept_prob;
        if (warm) beta_step.update(a_beta);
      }
      for (int i = 0; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const bool inc = s.effects.delta[iu] != 0;
        StepAdapter& st = inc ? joint_steps[iu] : partial_steps[iu];
        const double a = update_gamma_row(rng, i, model, s, st.step(), row_curv[iu], cfg.proposal).accept_prob;
        if (warm && (inc || q > 1)) st.update(a);
        a_gamma += a;
      }
      a_gamma /= n;
      update_location_shift(rng, model, s);
      for (int i = 0; i < n; ++i) update_delta(rng, i, model, s);
      s.effects.pi = update_pi(rng, s.effects.delta, model.hyper().pi_a, model.hyper().pi_b);
      if (!cfg.fix_sigma_gamma && cfg.sigma_substeps > 0) {
        const Eigen::MatrixXd scatter = model.kron().scatter(s.effects.gamma);
        a_sigma = 0.0;
        for (int k = 0; k < cfg.sigma_substeps; ++k) {
          const double a = update_sigma_gamma(rng, model, s, sigma_step.step(), &scatter).accept_prob;
          if (warm) sigma_step.update(a);
          a_sigma += a;
        }
        a_sigma /= cfg.sigma_substeps;
      }
    } catch (const NumericError& e) {
      throw NumericError("chain " + std::to_string(chain_id) + ", iteration " + std::to_string(t) +
                         ": " + e.what());
    }
    AcceptanceStats& sum = warm ? warm_sum : keep_sum;
    sum.beta += a_beta;
    sum.gamma += a_gamma;
    sum.sigma += a_sigma;
    if (warm) {
      out.warmup_beta_accept.push_back(a_beta);
      out.warmup_sigma_accept.push_back(a_sigma);
      continue;
    }
    if ((t - warmup) % cfg.thin != 0) continue;
    for (int k = 0; k < kDesignDim; ++k) out.beta.push_back(s.beta.beta(k));
    for (int i = 0; i < n; ++i) {
      out.theta_x.push_back(s.effects.theta_x(i));
      out.delta.push_back(s.effects.delta[static_cast<std::size_t>(i)]);
    }
    out.pi.push_back(s.effects.pi);
    out.log_posterior.push_back(log_posterior(model, s));
    for (Eigen::Index k = 0; k < s.sigma_gamma.log_chol.size(); ++k)
      out.log_chol.push_back(s.sigma_gamma.log_chol(k));
    for (Eigen::Index r = 0; r < s.eta_fixed.size(); ++r)
      if (std::abs(s.eta_fixed(r) + s.eta_random(r)) > kEtaClamp) ++out.eta_clamps;
  }
  if (warmup > 0) {
    out.warmup_acceptance = {warm_sum.beta / warmup, warm_sum.gamma / warmup, warm_sum.sigma / warmup};
  }
  const double kept = static_cast<double>(total - warmup);
  out.sampling_acceptance = {keep_sum.beta / kept, keep_sum.gamma / kept, keep_sum.sigma / kept};
  out.final_beta_step = beta_step.step();
  out.final_sigma_step = sigma_step.step();
  return out;
}

PosteriorDraws run_chains(const SamplerConfig& config, const Dataset& data,
                          const Eigen::MatrixXd& sigma_d) {
  config.validate();
  const Model model(data, sigma_d, config.re_columns, config.hyper);
  PosteriorDraws draws(static_cast<std::size_t>(config.n_chains));
  io::parallel_for(draws.size(), config.max_threads, [&](std::size_t c) {
    draws[c] = run_chain(config, model, static_cast<int>(c));
  });
  return draws;
}

}  // namespace sslab
