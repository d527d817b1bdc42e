#include "sslab/baselines.hpp"

#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"
#include "sslab/likelihood.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sslab {

namespace {

constexpr double kCorrection = 0.5;
constexpr double kZ975 = 1.959963984540054;

double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

DrugLogitFit fit_drug_logit(const Dataset& data, int drug) {
  const auto& recs = data.records();
  std::vector<std::size_t> rows;
  std::int64_t events = 0;
  for (std::size_t r : data.records_of(drug))
    if (recs[r].n_at_risk > 0) {
      rows.push_back(r);
      events += recs[r].n_events;
    }
  DrugLogitFit out;
  // No events in either window: left non-estimable, so p = 1.
  if (rows.empty() || events == 0) return out;

  // Greedy column choice in design order; a column is kept if it raises the rank.
  std::vector<int> cols;
  Eigen::MatrixXd x_all(static_cast<Eigen::Index>(rows.size()), kDesignDim);
  for (std::size_t k = 0; k < rows.size(); ++k)
    x_all.row(static_cast<Eigen::Index>(k)) = data.designs()[rows[k]].transpose();
  for (int c = 0; c < kDesignDim; ++c) {
    std::vector<int> trial = cols;
    trial.push_back(c);
    Eigen::MatrixXd sub(x_all.rows(), static_cast<Eigen::Index>(trial.size()));
    for (std::size_t k = 0; k < trial.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = x_all.col(trial[k]);
    Eigen::FullPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    if (qr.rank() == static_cast<Eigen::Index>(trial.size())) cols = std::move(trial);
  }
  if (cols.empty() || cols.back() != kExposureColumn) return out;
  const auto p = static_cast<Eigen::Index>(cols.size());
  if (static_cast<Eigen::Index>(rows.size()) <= p - 1) return out;

  Eigen::MatrixXd x(x_all.rows(), p);
  for (Eigen::Index k = 0; k < p; ++k) x.col(k) = x_all.col(cols[static_cast<std::size_t>(k)]);
  Eigen::VectorXd y(x.rows()), m(x.rows());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = recs[rows[k]];
    double yk = static_cast<double>(r.n_events);
    const double mk = static_cast<double>(r.n_at_risk);
    if (r.n_events == 0) yk = kCorrection;
    else if (r.n_events == r.n_at_risk) yk = mk - kCorrection;
    y(static_cast<Eigen::Index>(k)) = yk;
    m(static_cast<Eigen::Index>(k)) = mk;
  }
  // Start at the pooled log-odds for the intercept.
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  b(0) = std::log(y.sum() / (m.sum() - y.sum()));
  auto loglik = [&](const Eigen::VectorXd& bb) {
    const Eigen::VectorXd eta = x * bb;
    double s = 0.0;
    for (Eigen::Index k = 0; k < eta.size(); ++k) s += y(k) * eta(k) - m(k) * log1p_exp(eta(k));
    return s;
  };
  double ll = loglik(b);
  Eigen::MatrixXd info(p, p);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = x * b;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    info.setZero();
    for (Eigen::Index k = 0; k < eta.size(); ++k) {
      const double pk = logistic(eta(k));
      grad += (y(k) - m(k) * pk) * x.row(k).transpose();
      info += m(k) * pk * (1.0 - pk) * x.row(k).transpose() * x.row(k);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) return out;
    Eigen::VectorXd stepv = ldlt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd next = b + stepv;
    double ll_next = loglik(next);
    while (!(ll_next >= ll - 1e-12) && scale > 1e-8) {
      scale *= 0.5;
      next = b + scale * stepv;
      ll_next = loglik(next);
    }
    b = next;
    ll = ll_next;
    if (stepv.cwiseAbs().maxCoeff() * scale < 1e-10) break;
  }
  {
    const Eigen::VectorXd eta = x * b;
    info.setZero();
    for (Eigen::Index k = 0; k < eta.size(); ++k) {
      const double pk = logistic(eta(k));
      info += m(k) * pk * (1.0 - pk) * x.row(k).transpose() * x.row(k);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (!lu.isInvertible()) return out;
  const double var = lu.inverse()(p - 1, p - 1);
  if (!(var > 0.0) || !std::isfinite(b(p - 1))) return out;
  out.estimable = true;
  out.estimate = b(p - 1);
  out.se = std::sqrt(var);
  return out;
}

EbFit eb_fit(const Dataset& data, unsigned max_threads) {
  const int n = data.n_drugs();
  const auto nu = static_cast<std::size_t>(n);
  EbFit f;
  const double nan = std::nan("");
  f.estimate.assign(nu, nan);
  f.se.assign(nu, nan);
  f.shrinkage.assign(nu, 0.0);
  f.shrunken.assign(nu, 0.0);
  f.shrunken_se.assign(nu, nan);
  f.z.assign(nu, 0.0);
  f.p_value.assign(nu, 1.0);
  f.estimable.assign(nu, 0);

  std::int64_t events = 0;
  for (const auto& r : data.records()) events += r.n_events;
  if (events == 0) {
    f.degenerate = true;
    return f;
  }

  std::vector<DrugLogitFit> fits(nu);
  io::parallel_for(nu, max_threads, [&](std::size_t i) { fits[i] = fit_drug_logit(data, static_cast<int>(i)); });

  double sum_est2 = 0.0, sum_se2 = 0.0;
  for (std::size_t i = 0; i < nu; ++i) {
    if (!fits[i].estimable) continue;
    f.estimable[i] = 1;
    f.estimate[i] = fits[i].estimate;
    f.se[i] = fits[i].se;
    sum_est2 += fits[i].estimate * fits[i].estimate;
    sum_se2 += fits[i].se * fits[i].se;
    ++f.n_estimable;
  }
  if (f.n_estimable == 0) return f;
  // Moment estimate about zero: E[est^2] = tau2 + E[se^2] under a mean-zero prior.
  f.tau2 = std::max(0.0, (sum_est2 - sum_se2) / f.n_estimable);
  for (std::size_t i = 0; i < nu; ++i) {
    if (!f.estimable[i]) continue;
    const double s2 = f.se[i] * f.se[i];
    const double b = f.tau2 / (f.tau2 + s2);
    f.shrinkage[i] = b;
    f.shrunken[i] = b * f.estimate[i];
    f.shrunken_se[i] = std::sqrt(b) * f.se[i];
    if (b > 0.0) {
      f.z[i] = f.shrunken[i] / f.shrunken_se[i];
      f.p_value[i] = two_sided_p(f.z[i]);
    }
  }
  return f;
}

namespace {

void check_pvals(std::span<const double> pvals, double alpha) {
  for (double p : pvals)
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-values must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
}

}  // namespace

std::vector<int> bonferroni_select(std::span<const double> pvals, double alpha) {
  check_pvals(pvals, alpha);
  std::vector<int> out;
  const double cut = alpha / static_cast<double>(pvals.size());
  for (std::size_t i = 0; i < pvals.size(); ++i)
    if (pvals[i] <= cut) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> bh_select(std::span<const double> pvals, double alpha) {
  check_pvals(pvals, alpha);
  const std::size_t n = pvals.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pvals[static_cast<std::size_t>(a)] < pvals[static_cast<std::size_t>(b)]; });
  std::size_t k_max = 0;
  for (std::size_t k = 1; k <= n; ++k)
    if (pvals[static_cast<std::size_t>(order[k - 1])] <= static_cast<double>(k) * alpha / static_cast<double>(n))
      k_max = k;
  std::vector<int> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_max));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ReportRow> eb_report_rows(const EbFit& fit, const std::vector<std::string>& labels,
                                      const std::vector<int>& selected) {
  std::vector<bool> sel(fit.p_value.size(), false);
  for (int i : selected) sel.at(static_cast<std::size_t>(i)) = true;
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < fit.p_value.size(); ++i) {
    const double est = fit.shrunken[i];
    const double se = fit.estimable[i] ? fit.shrunken_se[i] : std::nan("");
    const double or_mean = std::exp(est);
    rows.push_back({labels.at(i), std::nan(""), fit.p_value[i], or_mean, std::exp(est - kZ975 * se),
                    std::exp(est + kZ975 * se), sel[i], classify_direction(or_mean)});
  }
  return rows;
}

}  // namespace sslab
