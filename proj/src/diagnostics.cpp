#include "sslab/diagnostics.hpp"

#include "sslab/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace sslab {

namespace {

double mean_of(const std::vector<double>& v, std::size_t b, std::size_t e) {
  double s = 0.0;
  for (std::size_t k = b; k < e; ++k) s += v[k];
  return s / static_cast<double>(e - b);
}

double var_of(const std::vector<double>& v, std::size_t b, std::size_t e, double m) {
  double s = 0.0;
  for (std::size_t k = b; k < e; ++k) s += (v[k] - m) * (v[k] - m);
  return s / static_cast<double>(e - b - 1);
}

std::size_t common_length(const ChainSeries& chains) {
  if (chains.empty()) throw EmptyInputError("no chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  return n;
}

}  // namespace

double split_rhat(const ChainSeries& chains, bool* zero_variance) {
  const std::size_t n_full = common_length(chains);
  const std::size_t half = n_full / 2;
  if (half < 2) throw DomainError("split R-hat needs at least 4 draws per chain");
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (std::size_t b : {std::size_t{0}, n_full - half}) {
      const double m = mean_of(c, b, b + half);
      means.push_back(m);
      vars.push_back(var_of(c, b, b + half, m));
    }
  }
  const auto m = static_cast<double>(means.size());
  const auto n = static_cast<double>(half);
  double w = 0.0, grand = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    w += vars[k];
    grand += means[k];
  }
  w /= m;
  grand /= m;
  double b = 0.0;
  for (double mk : means) b += (mk - grand) * (mk - grand);
  b *= n / (m - 1.0);
  if (zero_variance) *zero_variance = false;
  if (w <= 0.0) {
    if (b <= 0.0) {
      if (zero_variance) *zero_variance = true;
      return 1.0;
    }
    return std::numeric_limits<double>::infinity();
  }
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const ChainSeries& chains) {
  const std::size_t n = common_length(chains);
  if (n < 4) throw DomainError("ESS needs at least 4 draws per chain");
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c, 0, n));
    vars.push_back(var_of(c, 0, n, means.back()));
  }
  double w = 0.0, grand = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    w += vars[k];
    grand += means[k];
  }
  w /= m;
  grand /= m;
  double b = 0.0;
  if (chains.size() > 1) {
    for (double mk : means) b += (mk - grand) * (mk - grand);
    b *= nd / (m - 1.0);
  }
  const double var_plus = (nd - 1.0) / nd * w + b / nd;
  if (!(var_plus > 0.0)) return m * nd;

  // Lag-t autocorrelation combined over chains.
  auto rho = [&](std::size_t t) {
    double acov = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t k = 0; k + t < n; ++k) s += (x[k] - means[c]) * (x[k + t] - means[c]);
      acov += s / nd;
    }
    acov /= m;
    return 1.0 - (w - acov) / var_plus;
  };

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(m * nd));
  return m * nd / tau;
}

ParamDiagnostic diagnose(std::string name, const ChainSeries& chains, double flag_threshold) {
  ParamDiagnostic d;
  d.name = std::move(name);
  d.rhat = split_rhat(chains, &d.zero_variance);
  d.ess = d.zero_variance ? 0.0 : effective_sample_size(chains);
  d.flagged = d.rhat > flag_threshold;
  return d;
}

bool DiagnosticsReport::any_rhat_above(double limit) const {
  return std::any_of(params.begin(), params.end(),
                     [limit](const ParamDiagnostic& p) { return p.rhat > limit; });
}

DiagnosticsReport diagnostics(const PosteriorDraws& draws, const std::vector<std::string>& labels,
                              double flag_threshold) {
  if (draws.empty()) throw EmptyInputError("no chains");
  DiagnosticsReport rep;
  const std::size_t n_draws = draws.front().n_draws();
  if (draws.size() < 2) rep.warnings.push_back("fewer than 2 chains: R-hat compares chain halves only");
  if (n_draws < 100) rep.warnings.push_back("fewer than 100 kept draws per chain");
  const int n = draws.front().n_drugs;
  const int lc = draws.front().log_chol_len;

  auto collect = [&](auto&& get) {
    ChainSeries s;
    for (const auto& c : draws) {
      std::vector<double> v(c.n_draws());
      for (std::size_t d = 0; d < c.n_draws(); ++d) v[d] = get(c, d);
      s.push_back(std::move(v));
    }
    return s;
  };
  auto add = [&](std::string name, const ChainSeries& s) {
    rep.params.push_back(diagnose(std::move(name), s, flag_threshold));
  };

  for (int k = 0; k < kDesignDim; ++k)
    add("beta_" + std::to_string(k + 1), collect([k](const ChainDraws& c, std::size_t d) {
          return c.beta[d * kDesignDim + static_cast<std::size_t>(k)];
        }));
  for (int k = 0; k < lc; ++k)
    add("log_chol_" + std::to_string(k), collect([k, lc](const ChainDraws& c, std::size_t d) {
          return c.log_chol[d * static_cast<std::size_t>(lc) + static_cast<std::size_t>(k)];
        }));
  add("pi", collect([](const ChainDraws& c, std::size_t d) { return c.pi[d]; }));
  add("log_posterior", collect([](const ChainDraws& c, std::size_t d) { return c.log_posterior[d]; }));
  for (int i = 0; i < n; ++i) {
    const std::string label =
        static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)] : std::to_string(i);
    add("theta_" + label, collect([i](const ChainDraws& c, std::size_t d) { return c.theta(d, i); }));
    add("delta_" + label,
        collect([i](const ChainDraws& c, std::size_t d) { return c.included(d, i) ? 1.0 : 0.0; }));
  }

  rep.max_rhat = 1.0;
  rep.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& p : rep.params) {
    rep.max_rhat = std::max(rep.max_rhat, p.rhat);
    if (!p.zero_variance) rep.min_ess = std::min(rep.min_ess, p.ess);
  }
  if (std::isinf(rep.min_ess)) rep.min_ess = 0.0;
  for (const auto& c : draws) {
    rep.eta_clamps += c.eta_clamps;
    rep.warmup_acceptance.push_back(c.warmup_acceptance);
    rep.sampling_acceptance.push_back(c.sampling_acceptance);
  }
  if (rep.eta_clamps > 0)
    rep.warnings.push_back(std::to_string(rep.eta_clamps) + " linear predictors hit the clamp");
  return rep;
}

void write_diagnostics_json(std::ostream& out, const DiagnosticsReport& rep) {
  using nlohmann::json;
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return v > 0 ? json("inf") : json("nan");
  };
  auto acc = [](const AcceptanceStats& a) {
    return json{{"beta", a.beta}, {"gamma", a.gamma}, {"sigma_gamma", a.sigma}};
  };
  json j;
  j["max_rhat"] = num(rep.max_rhat);
  j["min_ess"] = num(rep.min_ess);
  j["eta_clamps"] = rep.eta_clamps;
  j["warnings"] = rep.warnings;
  json flagged = json::array();
  json params = json::array();
  for (const auto& p : rep.params) {
    params.push_back({{"name", p.name},
                      {"rhat", num(p.rhat)},
                      {"ess", num(p.ess)},
                      {"zero_variance", p.zero_variance},
                      {"flagged", p.flagged}});
    if (p.flagged) flagged.push_back(p.name);
  }
  j["flagged"] = flagged;
  json acc_w = json::array(), acc_s = json::array();
  for (const auto& a : rep.warmup_acceptance) acc_w.push_back(acc(a));
  for (const auto& a : rep.sampling_acceptance) acc_s.push_back(acc(a));
  j["acceptance"] = {{"warmup", acc_w}, {"sampling", acc_s}};
  j["parameters"] = params;
  out << j.dump(2) << '\n';
}

}  // namespace sslab
