#include "sslab/simulate.hpp"

#include "sslab/baselines.hpp"
#include "sslab/coprescription.hpp"
#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"
#include "sslab/likelihood.hpp"
#include "sslab/posterior.hpp"
#include "sslab/selection.hpp"

#include <fmt/format.h>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

namespace sslab {

int ScenarioSpec::n_signals() const {
  int k = 0;
  for (const auto& g : layout) k += g.count;
  return k;
}

void ScenarioSpec::validate() const {
  if (n_drugs < 1) throw DomainError("scenario needs at least one drug");
  for (const auto& g : layout) {
    if (g.count < 0) throw DomainError("effect group counts must be non-negative");
    if (!std::isfinite(g.theta)) throw DomainError("effect values must be finite");
  }
  if (n_signals() > n_drugs) throw DomainError("effect layout has more drugs than the scenario");
  if (!(random_intercept_sd >= 0.0)) throw DomainError("random_intercept_sd must be >= 0");
  if (!beta.allFinite()) throw DomainError("beta must be finite");
  if (n_replicates < 1) throw DomainError("n_replicates must be >= 1");
  if (!(tau >= 0.0)) throw DomainError("tau must be >= 0");
  switch (m.kind) {
    case MDistribution::Kind::lognormal:
      if (!(m.sigma >= 0.0) || !std::isfinite(m.mu)) throw DomainError("invalid lognormal m distribution");
      break;
    case MDistribution::Kind::fixed:
      if (m.fixed_value < 0) throw DomainError("fixed m must be >= 0");
      break;
    case MDistribution::Kind::file:
      if (m.values.empty()) throw DomainError("m distribution file has no values");
      break;
  }
  if (sigma_d.kind == SigmaDSpec::Kind::block) {
    if (sigma_d.first_k < 0 || sigma_d.first_k > n_drugs) throw DomainError("block size out of range");
    if (!(sigma_d.low <= sigma_d.high) || sigma_d.low <= -1.0 || sigma_d.high >= 1.0)
      throw DomainError("block correlations must satisfy -1 < low <= high < 1");
  }
}

std::vector<std::int64_t> load_m_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::int64_t> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = io::split_csv_line(line);
    if (f.empty() || f[0].empty() || f[0][0] == '#') continue;
    if (lineno == 1 && (f[0] == "n" || f[0] == "m")) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(f[0], &used);
      if (used != f[0].size() || v < 0) throw std::invalid_argument("bad");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("expected a non-negative integer stratum size", lineno);
    }
  }
  if (out.empty()) throw EmptyInputError("no stratum sizes in " + path.string());
  return out;
}

DesignVector default_true_beta() {
  DesignVector b;
  b << -9.36, 1.10, -0.212, -0.823, 0.078;
  return b;
}

ScenarioSpec scenario1_spec(int n_drugs) {
  ScenarioSpec s;
  s.name = "scenario1";
  s.n_drugs = n_drugs;
  s.beta = default_true_beta();
  if (n_drugs == 922) {
    s.layout = {{10, -1.00}, {20, -0.75}, {30, -0.50}, {30, 0.50}};
  } else {
    // Proportional shrink of the 10:20:30:30 mix out of 922.
    const double f = static_cast<double>(n_drugs) / 922.0;
    const int a = static_cast<int>(std::lround(10 * f));
    const int b = static_cast<int>(std::lround(20 * f));
    const int c = static_cast<int>(std::lround(30 * f));
    s.layout = {{a, -1.00}, {b, -0.75}, {c, -0.50}, {c, 0.50}};
  }
  return s;
}

ScenarioSpec scenario2_spec() {
  ScenarioSpec s;
  s.name = "scenario2";
  s.n_drugs = 100;
  s.beta = default_true_beta();
  s.layout = {{3, -0.75}, {17, -0.50}};
  s.sigma_d.kind = SigmaDSpec::Kind::block;
  return s;
}

Eigen::MatrixXd scenario_sigma_d(Rng& rng, const ScenarioSpec& spec) {
  const int n = spec.n_drugs;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  if (spec.sigma_d.kind == SigmaDSpec::Kind::identity) return m;
  std::uniform_real_distribution<double> u(spec.sigma_d.low, spec.sigma_d.high);
  for (int i = 0; i < spec.sigma_d.first_k; ++i)
    for (int j = i + 1; j < spec.sigma_d.first_k; ++j) m(i, j) = m(j, i) = u(rng);
  return nearest_pd(m);
}

namespace {

std::vector<std::string> drug_labels(int n) {
  const int width = static_cast<int>(std::to_string(std::max(n, 1)).size());
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(fmt::format("D{:0{}d}", i + 1, width));
  return out;
}

std::int64_t draw_m(Rng& rng, const MDistribution& md, std::size_t& cursor) {
  switch (md.kind) {
    case MDistribution::Kind::fixed:
      return md.fixed_value;
    case MDistribution::Kind::file:
      return md.values[cursor++ % md.values.size()];
    default: {
      const double v = std::exp(md.mu + md.sigma * std_normal(rng));
      return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(v)));
    }
  }
}

}  // namespace

GeneratedData generate_dataset(std::uint64_t seed, const ScenarioSpec& spec) {
  Rng rng(seed);
  return generate_dataset(rng, spec);
}

GeneratedData generate_dataset(Rng& rng, const ScenarioSpec& spec) {
  spec.validate();
  const std::uint64_t base = rng();
  Rng rng_sigma = make_rng(base, "sigma_d", 0);
  Rng rng_theta = make_rng(base, "theta", 0);
  Rng rng_m = make_rng(base, "m", 0);
  Rng rng_y = make_rng(base, "y", 0);
  const int n = spec.n_drugs;

  GeneratedData out;
  out.sigma_d = scenario_sigma_d(rng_sigma, spec);
  out.theta_x = Eigen::VectorXd::Zero(n);
  out.truth.assign(static_cast<std::size_t>(n), 0);
  int next = 0;
  for (const auto& g : spec.layout) {
    for (int k = 0; k < g.count; ++k, ++next) {
      out.theta_x(next) = g.theta;
      out.truth[static_cast<std::size_t>(next)] = g.theta != 0.0 ? 1 : 0;
    }
  }
  if (spec.tau > 0.0 && spec.sigma_d.kind != SigmaDSpec::Kind::identity && next > 0) {
    // Correlated perturbation of the signal coordinates, N(0, tau^2 Sigma_D[S, S]).
    const Eigen::MatrixXd sub = out.sigma_d.topLeftCorner(next, next);
    const Eigen::LLT<Eigen::MatrixXd> llt(sub);
    Eigen::VectorXd z(next);
    for (int k = 0; k < next; ++k) z(k) = std_normal(rng_theta);
    const Eigen::MatrixXd lower = llt.matrixL();
    out.theta_x.head(next) += spec.tau * (lower * z);
  }
  out.theta_1 = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) out.theta_1(i) = spec.random_intercept_sd * std_normal(rng_theta);

  std::vector<StratumRecord> recs;
  recs.reserve(static_cast<std::size_t>(n) * 8);
  std::size_t cursor = 0;
  for (int i = 0; i < n; ++i) {
    for (int age = 0; age <= 1; ++age) {
      for (int sex = 0; sex <= 1; ++sex) {
        std::int64_t m_pair = spec.m.paired_windows ? draw_m(rng_m, spec.m, cursor) : 0;
        for (int time = 0; time <= 1; ++time) {
          StratumRecord r;
          r.drug_id = i;
          r.age_adult = age;
          r.sex_female = sex;
          r.age_sex = age * sex;
          r.post_exposure = time;
          r.n_at_risk = spec.m.paired_windows ? m_pair : draw_m(rng_m, spec.m, cursor);
          const double eta = design_vector(r).dot(spec.beta) + out.theta_1(i) + out.theta_x(i) * time;
          std::binomial_distribution<std::int64_t> bin(r.n_at_risk, logistic(eta));
          r.n_events = bin(rng_y);
          recs.push_back(r);
        }
      }
    }
  }
  out.data = Dataset(std::move(recs), drug_labels(n));
  return out;
}

SelectionScore score_selection(const std::vector<int>& selected,
                               const std::vector<std::uint8_t>& truth) {
  SelectionScore s;
  s.n_selected = static_cast<int>(selected.size());
  for (int i : selected) s.true_positives += truth.at(static_cast<std::size_t>(i)) ? 1 : 0;
  int n_true = 0;
  for (auto t : truth) n_true += t ? 1 : 0;
  s.power = n_true > 0 ? static_cast<double>(s.true_positives) / n_true : 0.0;
  s.fdr = static_cast<double>(s.n_selected - s.true_positives) / std::max(s.n_selected, 1);
  return s;
}

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_abs_deviation(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - m));
  return median(std::move(dev));
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::eb_bonferroni: return "eb_bonferroni";
    case Method::eb_bh: return "eb_bh";
    case Method::spike_slab: return "spike_slab";
    default: return "spike_slab_copres";
  }
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::eb_bonferroni, Method::eb_bh, Method::spike_slab, Method::spike_slab_copres})
    if (to_string(m) == name) return m;
  throw DomainError("unknown method '" + std::string(name) + "'");
}

namespace {

// All rows of one replicate.
std::vector<MetricRow> run_replicate(const ScenarioSpec& spec, const BenchmarkOptions& opt, int rep) {
  const std::uint64_t rep_seed = derive_seed(spec.seed, "replicate", static_cast<std::uint64_t>(rep));
  const GeneratedData gen = generate_dataset(rep_seed, spec);

  auto has = [&](Method m) { return std::find(opt.methods.begin(), opt.methods.end(), m) != opt.methods.end(); };
  std::vector<double> p_values;
  std::string eb_error;
  if (has(Method::eb_bonferroni) || has(Method::eb_bh)) {
    try {
      p_values = eb_fit(gen.data).p_value;
    } catch (const std::exception& e) {
      eb_error = e.what();
    }
  }
  auto bayes_pips = [&](Method m, std::vector<double>& pips, std::string& err) {
    try {
      SamplerConfig cfg = opt.sampler;
      cfg.seed = derive_seed(rep_seed, to_string(m), 0);
      cfg.max_threads = 1;
      const Eigen::MatrixXd sd = m == Method::spike_slab_copres
                                     ? gen.sigma_d
                                     : Eigen::MatrixXd::Identity(spec.n_drugs, spec.n_drugs);
      pips = compute_pip(run_chains(cfg, gen.data, sd));
    } catch (const std::exception& e) {
      err = e.what();
    }
  };
  std::vector<double> pips_plain, pips_copres;
  std::string err_plain, err_copres;
  if (has(Method::spike_slab)) bayes_pips(Method::spike_slab, pips_plain, err_plain);
  if (has(Method::spike_slab_copres)) bayes_pips(Method::spike_slab_copres, pips_copres, err_copres);

  std::vector<MetricRow> rows;
  for (const auto& level : opt.alphas) {
    for (Method m : opt.methods) {
      MetricRow row{m, level.alpha, rep, true, {}, {}};
      std::vector<int> selected;
      const std::string* err = nullptr;
      switch (m) {
        case Method::eb_bonferroni:
        case Method::eb_bh:
          err = &eb_error;
          if (eb_error.empty())
            selected = m == Method::eb_bh ? bh_select(p_values, level.alpha)
                                          : bonferroni_select(p_values, level.alpha);
          break;
        case Method::spike_slab:
          err = &err_plain;
          if (err_plain.empty()) selected = optimal_threshold(pips_plain, level.alpha_r).selected;
          break;
        case Method::spike_slab_copres:
          err = &err_copres;
          if (err_copres.empty()) selected = optimal_threshold(pips_copres, level.alpha_r).selected;
          break;
      }
      if (!err->empty()) {
        row.ok = false;
        row.message = *err;
      } else {
        row.score = score_selection(selected, gen.truth);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace

std::vector<SummaryRow> summarize_metrics(const std::vector<MetricRow>& rows,
                                          const BenchmarkOptions& options) {
  std::vector<SummaryRow> out;
  for (const auto& level : options.alphas) {
    for (Method m : options.methods) {
      SummaryRow s{};
      s.method = m;
      s.alpha = level.alpha;
      std::vector<double> ns, pw, fd;
      for (const auto& r : rows) {
        if (r.method != m || r.alpha != level.alpha) continue;
        if (!r.ok) {
          ++s.n_failed;
          continue;
        }
        ns.push_back(r.score.n_selected);
        pw.push_back(r.score.power);
        fd.push_back(r.score.fdr);
      }
      s.n_ok = static_cast<int>(ns.size());
      if (!ns.empty()) {
        s.n_selected_median = median(ns);
        s.n_selected_mad = median_abs_deviation(ns);
        s.power_median = median(pw);
        s.power_mad = median_abs_deviation(pw);
        s.fdr_median = median(fd);
        s.fdr_mad = median_abs_deviation(fd);
      } else {
        s.n_selected_median = s.n_selected_mad = s.power_median = s.power_mad = s.fdr_median =
            s.fdr_mad = std::nan("");
      }
      out.push_back(s);
    }
  }
  return out;
}

BenchmarkResult run_benchmark(const ScenarioSpec& spec, const BenchmarkOptions& options) {
  spec.validate();
  if (options.methods.empty()) throw DomainError("no methods requested");
  if (options.alphas.empty()) throw DomainError("no alpha levels requested");
  for (const auto& a : options.alphas)
    if (!(a.alpha > 0 && a.alpha <= 1 && a.alpha_r > 0 && a.alpha_r <= 1))
      throw DomainError("alpha levels must lie in (0, 1]");
  options.sampler.validate();
  std::vector<std::vector<MetricRow>> per_rep(static_cast<std::size_t>(spec.n_replicates));
  io::parallel_for(per_rep.size(), options.max_threads, [&](std::size_t r) {
    per_rep[r] = run_replicate(spec, options, static_cast<int>(r));
  });
  BenchmarkResult res;
  for (auto& v : per_rep)
    for (auto& row : v) res.rows.push_back(std::move(row));
  res.summary = summarize_metrics(res.rows, options);
  return res;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "method,alpha,replicate,n_selected,power,fdr,status\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << io::format_double(r.alpha) << ',' << r.replicate << ',';
    if (r.ok) {
      out << r.score.n_selected << ',' << io::format_double(r.score.power) << ','
          << io::format_double(r.score.fdr) << ",ok\n";
    } else {
      out << ",,,missing\n";
    }
  }
}

void write_benchmark_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,alpha,n_selected_median,n_selected_mad,power_median,power_mad,fdr_median,"
         "fdr_mad,n_ok,n_failed\n";
  auto f = [](double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.4f}", v); };
  for (const auto& s : rows) {
    out << to_string(s.method) << ',' << io::format_double(s.alpha) << ',' << f(s.n_selected_median)
        << ',' << f(s.n_selected_mad) << ',' << f(s.power_median) << ',' << f(s.power_mad) << ','
        << f(s.fdr_median) << ',' << f(s.fdr_mad) << ',' << s.n_ok << ',' << s.n_failed << '\n';
  }
}

}  // namespace sslab
