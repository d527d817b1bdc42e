// Command-line front end: build-sigma, fit, select, simulate, report.
//
// Every subcommand accepts --config FILE with flat `key = value` lines whose
// keys are the long option names. Flags on the command line win over the
// file. The resolved settings are echoed to config_<cmd>.txt and to
// manifest_<cmd>.json in the output directory; either file can be passed back
// to --config to repeat the run.
//
// Exit codes: 0 ok, 1 usage, 2 invalid input, 3 numeric failure,
// 4 R-hat above the limit (outputs are still written).

#include "sslab/baselines.hpp"
#include "sslab/coprescription.hpp"
#include "sslab/core_data.hpp"
#include "sslab/diagnostics.hpp"
#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"
#include "sslab/posterior.hpp"
#include "sslab/sampler.hpp"
#include "sslab/selection.hpp"
#include "sslab/simulate.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sslab;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kNumeric = 3, kNotConverged = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplerSettings {
  int chains = 4;
  int warmup = 2000;
  int keep = 2000;
  int thin = 1;
  std::string proposal = "rw";
  std::string re_columns = "0,4";
  double beta_sd = 10.0;
  double log_chol_sd = 1.0;
  double pi_a = 1.0;
  double pi_b = 1.0;
  int sigma_substeps = 5;
};

struct Settings {
  std::string config;
  std::string out_dir = "sslab_out";
  std::uint64_t seed = 20240611;

  // build-sigma
  std::string method = "tetrachoric";
  std::string copres_in;
  std::int64_t n_total = 0;
  std::string n_total_file;
  int n_drugs = 0;
  double eps_pd = kDefaultEpsPd;

  // fit
  std::string data;
  std::string drug_names;
  std::string sigma_d;
  SamplerSettings sampler;
  double cri = 0.95;
  double rhat_limit = 1.1;
  bool write_draws = false;

  // select
  std::string summary;
  std::string select_method = "bayes";
  double alpha_r = 0.02;
  double alpha = 0.05;

  // simulate
  int scenario = 2;
  std::string alphas = "0.05";
  std::string alpha_rs;
  int replicates = 0;
  std::string methods = "eb_bonferroni,eb_bh,spike_slab,spike_slab_copres";
  double m_mu = MDistribution{}.mu;
  double m_sigma = MDistribution{}.sigma;
  std::int64_t m_fixed = 0;
  std::string m_file;
  bool m_unpaired = false;
  double tau = 0.0;
  double random_intercept_sd = 0.3;

  // report
  std::vector<std::string> benchmark;
  std::string selection;
  int top = 25;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : io::split_csv_line(s))
    if (!f.empty()) out.push_back(f);
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& f : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(f, &used));
      if (used != f.size()) throw std::invalid_argument(f);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("{}: '{}' is not a number", what, f));
    }
  }
  return out;
}

void add_common(CLI::App* sub, Settings& s) {
  sub->add_option("--config", s.config, "Flat key = value settings file, or a manifest JSON");
  sub->add_option("--out-dir", s.out_dir, "Output directory")->capture_default_str();
}

void add_sampler(CLI::App* sub, Settings& s) {
  auto& p = s.sampler;
  sub->add_option("--seed", s.seed, "Master seed")->capture_default_str();
  sub->add_option("--chains", p.chains, "Number of chains")->capture_default_str();
  sub->add_option("--warmup", p.warmup, "Warmup iterations per chain")->capture_default_str();
  sub->add_option("--keep", p.keep, "Kept draws per chain")->capture_default_str();
  sub->add_option("--thin", p.thin, "Keep one draw every this many iterations")->capture_default_str();
  sub->add_option("--proposal", p.proposal, "rw or mala")->capture_default_str();
  sub->add_option("--re-columns", p.re_columns,
                  "Design columns with drug-specific effects (0 intercept .. 4 exposure)")
      ->capture_default_str();
  sub->add_option("--beta-sd", p.beta_sd, "Prior SD of the fixed effects")->capture_default_str();
  sub->add_option("--log-chol-sd", p.log_chol_sd, "Prior SD of each log-Cholesky element")
      ->capture_default_str();
  sub->add_option("--pi-a", p.pi_a, "Beta prior on pi, first shape")->capture_default_str();
  sub->add_option("--pi-b", p.pi_b, "Beta prior on pi, second shape")->capture_default_str();
  sub->add_option("--sigma-substeps", p.sigma_substeps, "Sigma_gamma updates per iteration")
      ->capture_default_str();
}

struct Cli {
  CLI::App app{"Bayesian spike-and-slab screening of drug safety signals"};
  Settings s;
  CLI::App* build_sigma = nullptr;
  CLI::App* fit = nullptr;
  CLI::App* select = nullptr;
  CLI::App* simulate = nullptr;
  CLI::App* report = nullptr;

  Cli() {
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    build_sigma = app.add_subcommand("build-sigma", "Drug-level correlation matrix from co-prescription counts");
    add_common(build_sigma, s);
    build_sigma->add_option("--method", s.method, "tetrachoric, pearson, conditional or identity")
        ->capture_default_str();
    build_sigma->add_option("--in", s.copres_in, "Co-prescription count CSV");
    build_sigma->add_option("--n-total", s.n_total, "Cohort size");
    build_sigma->add_option("--n-total-file", s.n_total_file, "File holding the cohort size");
    build_sigma->add_option("--n-drugs", s.n_drugs, "Matrix size for --method identity");
    build_sigma->add_option("--drug-names", s.drug_names, "Labels for --method identity");
    build_sigma->add_option("--eps-pd", s.eps_pd, "Eigenvalue floor of the repair")->capture_default_str();

    fit = app.add_subcommand("fit", "Posterior sampling; writes summary.csv and diagnostics.json");
    add_common(fit, s);
    fit->add_option("--data", s.data, "Stratum CSV");
    fit->add_option("--drug-names", s.drug_names, "index,drug sidecar when the data use dense indices");
    fit->add_option("--sigma-d", s.sigma_d, "Sigma_D matrix CSV (default identity)");
    add_sampler(fit, s);
    fit->add_option("--cri", s.cri, "Credible interval level")->capture_default_str();
    fit->add_option("--rhat-limit", s.rhat_limit, "Exit 4 when any R-hat exceeds this")
        ->capture_default_str();
    fit->add_flag("--write-draws", s.write_draws, "Also write every kept draw to draws.csv");

    select = app.add_subcommand("select", "Signal selection; writes selection.csv");
    add_common(select, s);
    select->add_option("--method", s.select_method, "bayes, eb_bonferroni or eb_bh")->capture_default_str();
    select->add_option("--summary", s.summary, "Posterior summary CSV from fit (bayes)");
    select->add_option("--alpha-r", s.alpha_r, "Target expected FDR (bayes)")->capture_default_str();
    select->add_option("--data", s.data, "Stratum CSV (eb_*)");
    select->add_option("--drug-names", s.drug_names, "index,drug sidecar (eb_*)");
    select->add_option("--alpha", s.alpha, "Family-wise or FDR level (eb_*)")->capture_default_str();

    simulate = app.add_subcommand("simulate", "Simulation benchmark; writes metrics.csv and benchmark_summary.csv");
    add_common(simulate, s);
    simulate->add_option("--scenario", s.scenario, "1 or 2")->capture_default_str();
    simulate->add_option("--n-drugs", s.n_drugs, "Scenario 1 size (0: 922); proportional shrink below")
        ->capture_default_str();
    simulate->add_option("--alpha", s.alphas, "Comma-separated target levels")->capture_default_str();
    simulate->add_option("--alpha-r", s.alpha_rs, "Bayesian levels paired with --alpha (default equal)");
    simulate->add_option("--replicates", s.replicates, "Replicates (0: 50)")->capture_default_str();
    simulate->add_option("--methods", s.methods, "Comma-separated methods")->capture_default_str();
    simulate->add_option("--m-mu", s.m_mu, "Log-normal stratum size, log-scale mean")->capture_default_str();
    simulate->add_option("--m-sigma", s.m_sigma, "Log-normal stratum size, log-scale SD")->capture_default_str();
    simulate->add_option("--m-fixed", s.m_fixed, "Fixed stratum size (0: off)")->capture_default_str();
    simulate->add_option("--m-file", s.m_file, "Stratum sizes, one per line, recycled");
    simulate->add_flag("--m-unpaired", s.m_unpaired, "Draw pre and post stratum sizes separately");
    simulate->add_option("--tau", s.tau, "SD multiplier of correlated signal perturbation")->capture_default_str();
    simulate->add_option("--random-intercept-sd", s.random_intercept_sd, "SD of drug intercepts")
        ->capture_default_str();
    add_sampler(simulate, s);

    report = app.add_subcommand("report", "Markdown tables from benchmark, summary and selection CSVs");
    add_common(report, s);
    report->add_option("--benchmark", s.benchmark, "benchmark_summary.csv files (repeatable)");
    report->add_option("--summary", s.summary, "Posterior summary CSV");
    report->add_option("--selection", s.selection, "Selection report CSV");
    report->add_option("--top", s.top, "Posterior summary rows shown, by decreasing PIP")->capture_default_str();
  }

  CLI::App* active() const { return app.get_subcommands().front(); }
};

std::string strip_quotes(std::string v) {
  if (v.size() >= 2 && ((v.front() == '\'' && v.back() == '\'') || (v.front() == '"' && v.back() == '"')))
    v = v.substr(1, v.size() - 2);
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Key/value pairs from a flat settings file or from the "config" object of a
// manifest.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  const std::string text = io::read_text(path);
  std::vector<std::pair<std::string, std::string>> out;
  if (trim(text).rfind('{', 0) == 0) {
    const json j = json::parse(text);
    if (!j.contains("config") || !j["config"].is_object())
      throw UsageError(path.string() + ": manifest has no config object");
    for (const auto& [k, v] : j["config"].items())
      out.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    return out;
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(fmt::format("{}:{}: expected key = value", path.string(), lineno));
    out.emplace_back(trim(t.substr(0, eq)), strip_quotes(trim(t.substr(eq + 1))));
  }
  return out;
}

// Settings echo: one line per option of the subcommand, in declaration order.
std::vector<std::pair<std::string, std::string>> echo_settings(const CLI::App* sub) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->get_expected_max() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      for (std::size_t k = 0; k < r.size(); ++k) value += (k ? "," : "") + r[k];
    } else {
      value = opt->get_default_str();
    }
    out.emplace_back(name, value);
  }
  return out;
}

// Rebuilds the argument list with settings from --config placed ahead of the
// command-line flags, skipping keys the command line already sets.
std::vector<std::string> with_config(const std::vector<std::string>& args, const Cli& first) {
  CLI::App* sub = first.active();
  std::vector<std::string> out{args[0], sub->get_name()};
  for (const auto& [key, value] : read_config(first.s.config)) {
    if (key == "config") continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(fmt::format("unknown config key '{}' for {}", key, sub->get_name()));
    if (opt->count() > 0 || value.empty()) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1") out.push_back("--" + key);
      else if (value != "false" && value != "0")
        throw UsageError(fmt::format("config key '{}' expects true or false", key));
      continue;
    }
    if (opt->get_items_expected_max() > 1) {
      for (const auto& v : split_list(value)) out.push_back("--" + key + "=" + v);
    } else {
      out.push_back("--" + key + "=" + value);
    }
  }
  for (std::size_t k = 1; k < args.size(); ++k)
    if (args[k] != sub->get_name()) out.push_back(args[k]);
  return out;
}

// CLI11 parse with help/version handled; returns -1 to continue.
int parse_args(Cli& cli, const std::vector<std::string>& args) {
  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    cli.app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = cli.app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  return -1;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(fmt::format("{} is required", flag));
}

SamplerConfig sampler_config(const Settings& s) {
  SamplerConfig c;
  c.n_chains = s.sampler.chains;
  c.n_warmup = s.sampler.warmup;
  c.n_keep = s.sampler.keep;
  c.thin = s.sampler.thin;
  c.seed = s.seed;
  c.proposal = parse_proposal_kind(s.sampler.proposal);
  c.re_columns.clear();
  for (double v : parse_doubles(s.sampler.re_columns, "--re-columns")) c.re_columns.push_back(static_cast<int>(v));
  c.hyper.beta_sd = s.sampler.beta_sd;
  c.hyper.log_chol_sd = s.sampler.log_chol_sd;
  c.hyper.pi_a = s.sampler.pi_a;
  c.hyper.pi_b = s.sampler.pi_b;
  c.sigma_substeps = s.sampler.sigma_substeps;
  c.max_threads = io::default_thread_count();
  if (!(c.hyper.beta_sd > 0 && c.hyper.log_chol_sd > 0 && c.hyper.pi_a > 0 && c.hyper.pi_b > 0))
    throw DomainError("prior scales and shapes must be positive");
  return c;
}

Dataset load_data(const Settings& s) {
  require(s.data, "--data");
  return s.drug_names.empty() ? load_dataset(s.data) : load_dataset(s.data, s.drug_names);
}

struct RunContext {
  fs::path out_dir;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  json extra = json::object();

  void write(const std::string& name, const std::function<void(std::ostream&)>& writer) {
    io::write_atomic(out_dir / name, writer);
    outputs.push_back(name);
  }
  void warn(std::string w) {
    std::cerr << "warning: " << w << '\n';
    warnings.push_back(std::move(w));
  }
};

int cmd_build_sigma(const Settings& s, RunContext& ctx) {
  const SimilarityMethod method = parse_similarity_method(s.method);
  DrugCovariance cov;
  std::vector<std::string> labels;
  if (method == SimilarityMethod::identity && s.copres_in.empty()) {
    if (!s.drug_names.empty()) {
      std::ifstream in(s.drug_names);
      if (!in) throw Error("cannot open " + s.drug_names);
      labels = parse_drug_names(in);
    }
    const int n = labels.empty() ? s.n_drugs : static_cast<int>(labels.size());
    if (n < 1) throw UsageError("--method identity needs --n-drugs, --drug-names or --in");
    cov = identity_sigma_d(static_cast<std::size_t>(n));
    cov.eps_pd = s.eps_pd;
    if (labels.empty())
      for (int i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  } else {
    require(s.copres_in, "--in");
    std::int64_t n_total = s.n_total;
    if (!s.n_total_file.empty()) n_total = load_n_total(s.n_total_file);
    if (n_total <= 0) throw UsageError("--n-total or --n-total-file is required");
    const auto table = load_coprescription(s.copres_in, n_total);
    cov = build_sigma_d(table, method, s.eps_pd);
    labels = table.labels;
  }
  ctx.write("sigma_d.csv", [&](std::ostream& o) { write_matrix_csv(o, cov.matrix, labels); });
  json prov{{"method", std::string(to_string(cov.method))},
            {"eps_pd", cov.eps_pd},
            {"repaired", cov.repaired},
            {"min_eigenvalue_raw", cov.min_eigenvalue_raw},
            {"min_eigenvalue", cov.min_eigenvalue},
            {"n_drugs", cov.matrix.rows()}};
  ctx.write("sigma_d.json", [&](std::ostream& o) { o << prov.dump(2) << '\n'; });
  if (cov.repaired) ctx.warn(fmt::format("Sigma_D repaired: raw min eigenvalue {:.6g}", cov.min_eigenvalue_raw));
  return kOk;
}

int cmd_fit(const Settings& s, RunContext& ctx) {
  const Dataset data = load_data(s);
  for (const auto& w : data.warnings()) ctx.warn(w);
  Eigen::MatrixXd sigma_d = Eigen::MatrixXd::Identity(data.n_drugs(), data.n_drugs());
  if (!s.sigma_d.empty()) {
    std::vector<std::string> labels;
    sigma_d = load_matrix_csv(s.sigma_d, &labels);
    if (sigma_d.rows() != data.n_drugs())
      throw DimensionError(fmt::format("Sigma_D has {} rows but the data have {} drugs", sigma_d.rows(),
                                       data.n_drugs()));
    if (!labels.empty() && labels != data.drug_names())
      throw ValidationError("Sigma_D labels do not match the drug order of the data");
  }
  const SamplerConfig cfg = sampler_config(s);
  for (const auto& w : cfg.validate()) ctx.warn(w);
  const PosteriorDraws draws = run_chains(cfg, data, sigma_d);
  const auto summary = summarize(draws, data.drug_names(), s.cri);
  ctx.write("summary.csv", [&](std::ostream& o) { write_summary_csv(o, summary); });
  const auto diag = diagnostics(draws, data.drug_names());
  ctx.write("diagnostics.json", [&](std::ostream& o) { write_diagnostics_json(o, diag); });
  if (s.write_draws) ctx.write("draws.csv", [&](std::ostream& o) { write_draws_csv(o, draws, data.drug_names()); });
  for (const auto& w : diag.warnings) ctx.warn(w);
  ctx.extra["max_rhat"] = diag.max_rhat;
  ctx.extra["min_ess"] = diag.min_ess;
  if (diag.any_rhat_above(s.rhat_limit)) {
    ctx.warn(fmt::format("max R-hat {:.4f} exceeds {}", diag.max_rhat, s.rhat_limit));
    return kNotConverged;
  }
  return kOk;
}

std::string fmt_num(double x) { return io::format_double(x); }

int cmd_select(const Settings& s, RunContext& ctx) {
  if (s.select_method == "bayes") {
    require(s.summary, "--summary");
    std::ifstream in(s.summary);
    if (!in) throw Error("cannot open " + s.summary);
    const auto summary = parse_summary_csv(in);
    std::vector<double> pips;
    for (const auto& d : summary) pips.push_back(d.pip);
    SelectionResult r = optimal_threshold(pips, s.alpha_r);
    classify_selection(r, summary);
    if (!r.feasible) ctx.warn("no nonempty selection meets the FDR target");
    const std::vector<std::pair<std::string, std::string>> header{
        {"alpha_r", fmt_num(s.alpha_r)},
        {"threshold", fmt_num(r.threshold)},
        {"n_selected", std::to_string(r.selected.size())},
        {"expected_fdr", fmt_num(r.expected_fdr)},
        {"expected_fnr", fmt_num(r.expected_fnr)},
        {"feasible", r.feasible ? "true" : "false"}};
    ctx.write("selection.csv", [&](std::ostream& o) {
      write_selection_report(o, "spike_slab", bayes_report_rows(summary, r), header);
    });
    ctx.write("fdr_curve.csv", [&](std::ostream& o) { write_curve_csv(o, fdr_curve(pips)); });
    ctx.extra["n_selected"] = r.selected.size();
    return kOk;
  }
  if (s.select_method != "eb_bonferroni" && s.select_method != "eb_bh")
    throw UsageError("--method must be bayes, eb_bonferroni or eb_bh");
  if (!(s.alpha > 0.0 && s.alpha <= 1.0)) throw DomainError("--alpha must lie in (0, 1]");
  const Dataset data = load_data(s);
  const EbFit fit = eb_fit(data, io::default_thread_count());
  if (fit.degenerate) ctx.warn("no events in the data: every p-value is 1");
  const auto sel = s.select_method == "eb_bh" ? bh_select(fit.p_value, s.alpha)
                                              : bonferroni_select(fit.p_value, s.alpha);
  const std::vector<std::pair<std::string, std::string>> header{
      {"alpha", fmt_num(s.alpha)},
      {"tau2", fmt_num(fit.tau2)},
      {"n_estimable", std::to_string(fit.n_estimable)},
      {"n_selected", std::to_string(sel.size())}};
  ctx.write("selection.csv", [&](std::ostream& o) {
    write_selection_report(o, s.select_method, eb_report_rows(fit, data.drug_names(), sel), header);
  });
  ctx.extra["n_selected"] = sel.size();
  return kOk;
}

int cmd_simulate(const Settings& s, RunContext& ctx) {
  ScenarioSpec spec;
  if (s.scenario == 1) spec = s.n_drugs > 0 ? scenario1_spec(s.n_drugs) : scenario1_spec();
  else if (s.scenario == 2) spec = scenario2_spec();
  else throw UsageError("--scenario must be 1 or 2");
  if (s.scenario == 2 && s.n_drugs > 0 && s.n_drugs != 100)
    throw UsageError("--n-drugs applies to scenario 1 only");
  spec.seed = s.seed;
  if (s.replicates > 0) spec.n_replicates = s.replicates;
  spec.m.mu = s.m_mu;
  spec.m.sigma = s.m_sigma;
  spec.m.paired_windows = !s.m_unpaired;
  if (s.m_fixed > 0) {
    spec.m.kind = MDistribution::Kind::fixed;
    spec.m.fixed_value = s.m_fixed;
  }
  if (!s.m_file.empty()) {
    spec.m.kind = MDistribution::Kind::file;
    spec.m.values = load_m_values(s.m_file);
  }
  spec.tau = s.tau;
  spec.random_intercept_sd = s.random_intercept_sd;
  spec.validate();

  BenchmarkOptions opt;
  opt.methods.clear();
  for (const auto& m : split_list(s.methods)) opt.methods.push_back(parse_method(m));
  if (opt.methods.empty()) throw UsageError("--methods is empty");
  const auto alphas = parse_doubles(s.alphas, "--alpha");
  auto alpha_rs = s.alpha_rs.empty() ? alphas : parse_doubles(s.alpha_rs, "--alpha-r");
  if (alphas.empty() || alphas.size() != alpha_rs.size())
    throw UsageError("--alpha and --alpha-r need the same number of entries");
  opt.alphas.clear();
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 0 && alphas[k] <= 1 && alpha_rs[k] > 0 && alpha_rs[k] <= 1))
      throw DomainError("alpha levels must lie in (0, 1]");
    opt.alphas.push_back({alphas[k], alpha_rs[k]});
  }
  opt.sampler = sampler_config(s);
  for (const auto& w : opt.sampler.validate()) ctx.warn(w);
  opt.max_threads = io::default_thread_count();
  opt.sampler.max_threads = 1;

  const auto result = run_benchmark(spec, opt);
  ctx.write("metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, result.rows); });
  ctx.write("benchmark_summary.csv", [&](std::ostream& o) { write_benchmark_summary_csv(o, result.summary); });
  for (const auto& r : result.summary)
    if (r.n_failed > 0)
      ctx.warn(fmt::format("{} at alpha {}: {} replicate(s) failed", to_string(r.method), fmt_num(r.alpha), r.n_failed));
  ctx.extra["scenario"] = spec.name;
  ctx.extra["n_drugs"] = spec.n_drugs;
  ctx.extra["n_replicates"] = spec.n_replicates;
  return kOk;
}

// Markdown rendering. Numbers are copied from the CSV text unchanged.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    std::vector<std::string>* comments = nullptr) {
  std::istringstream in(io::read_text(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (comments) comments->push_back(trim(line.substr(1)));
      continue;
    }
    rows.push_back(io::split_csv_line(line));
  }
  if (rows.empty()) throw EmptyInputError(path + " has no rows");
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const std::string& file) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError(fmt::format("{}: missing column '{}'", file, name));
  return static_cast<std::size_t>(it - header.begin());
}

void render_benchmark(std::ostream& o, const std::string& path) {
  const auto rows = read_csv_rows(path);
  const auto& h = rows[0];
  const auto cm = column(h, "method", path), ca = column(h, "alpha", path);
  const auto cn = column(h, "n_selected_median", path), cnm = column(h, "n_selected_mad", path);
  const auto cp = column(h, "power_median", path), cpm = column(h, "power_mad", path);
  const auto cf = column(h, "fdr_median", path), cfm = column(h, "fdr_mad", path);
  const auto cok = column(h, "n_ok", path), cfail = column(h, "n_failed", path);
  o << "## " << fs::path(path).parent_path().filename().string() << '/' << fs::path(path).filename().string()
    << "\n\nMedian (MAD) over replicates.\n\n";
  o << "| Method | Target | Selected | Power | FDR | Replicates | Failed |\n";
  o << "|---|---|---|---|---|---|---|\n";
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.size() < h.size()) throw ValidationError(path + ": short row");
    o << "| " << r[cm] << " | " << r[ca] << " | " << r[cn] << " (" << r[cnm] << ") | " << r[cp] << " ("
      << r[cpm] << ") | " << r[cf] << " (" << r[cfm] << ") | " << r[cok] << " | " << r[cfail] << " |\n";
  }
  o << '\n';
}

void render_summary(std::ostream& o, const std::string& path, int top) {
  const auto rows = read_csv_rows(path);
  const auto& h = rows[0];
  const auto cd = column(h, "drug", path), cp = column(h, "pip", path);
  const auto cm = column(h, "or_mean", path), cl = column(h, "or_low", path), chi = column(h, "or_high", path);
  std::vector<std::size_t> order;
  for (std::size_t k = 1; k < rows.size(); ++k) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::stod(rows[a][cp]) > std::stod(rows[b][cp]); });
  if (top > 0 && order.size() > static_cast<std::size_t>(top)) order.resize(static_cast<std::size_t>(top));
  o << "## Posterior summary\n\n| Drug | PIP | OR mean | CrI low | CrI high |\n|---|---|---|---|---|\n";
  for (auto k : order)
    o << "| " << rows[k][cd] << " | " << rows[k][cp] << " | " << rows[k][cm] << " | " << rows[k][cl] << " | "
      << rows[k][chi] << " |\n";
  o << '\n';
}

void render_selection(std::ostream& o, const std::string& path) {
  std::vector<std::string> comments;
  const auto rows = read_csv_rows(path, &comments);
  const auto& h = rows[0];
  const auto cmeth = column(h, "method", path), cd = column(h, "drug", path);
  const auto cp = column(h, "pip", path), cpv = column(h, "p_value", path), cm = column(h, "or_mean", path);
  const auto cl = column(h, "or_low", path), chi = column(h, "or_high", path);
  const auto cs = column(h, "selected", path), cdir = column(h, "direction", path);
  o << "## Selected drugs (" << (rows.size() > 1 ? rows[1][cmeth] : std::string("none")) << ")\n\n";
  for (const auto& c : comments) o << "- " << c << '\n';
  o << "\n| Drug | PIP | p-value | OR | Low | High | Direction |\n|---|---|---|---|---|---|---|\n";
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r[cs] != "1" && r[cs] != "true") continue;
    o << "| " << r[cd] << " | " << r[cp] << " | " << r[cpv] << " | " << r[cm] << " | " << r[cl] << " | " << r[chi]
      << " | " << r[cdir] << " |\n";
  }
  o << '\n';
}

int cmd_report(const Settings& s, RunContext& ctx) {
  if (s.benchmark.empty() && s.summary.empty() && s.selection.empty())
    throw UsageError("report needs --benchmark, --summary or --selection");
  std::ostringstream md;
  md << "# sslab report\n\n";
  for (const auto& b : s.benchmark) render_benchmark(md, b);
  if (!s.summary.empty()) render_summary(md, s.summary, s.top);
  if (!s.selection.empty()) render_selection(md, s.selection);
  const std::string text = md.str();
  ctx.write("report.md", [&](std::ostream& o) { o << text; });
  return kOk;
}

std::string compiler_id() {
#if defined(__clang__)
  return fmt::format("clang {}.{}.{}", __clang_major__, __clang_minor__, __clang_patchlevel__);
#elif defined(__GNUC__)
  return fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__);
#else
  return "unknown";
#endif
}

int run(const std::vector<std::string>& raw_args) {
  Cli first;
  if (const int code = parse_args(first, raw_args); code >= 0) return code;
  Cli cli;
  if (!first.s.config.empty()) {
    if (const int code = parse_args(cli, with_config(raw_args, first)); code >= 0) return code;
  } else {
    if (const int code = parse_args(cli, raw_args); code >= 0) return code;
  }
  CLI::App* sub = cli.active();
  const std::string name = sub->get_name();
  const auto settings = echo_settings(sub);

  RunContext ctx;
  ctx.out_dir = cli.s.out_dir;
  const auto start = std::chrono::steady_clock::now();

  int code = kOk;
  if (name == "build-sigma") code = cmd_build_sigma(cli.s, ctx);
  else if (name == "fit") code = cmd_fit(cli.s, ctx);
  else if (name == "select") code = cmd_select(cli.s, ctx);
  else if (name == "simulate") code = cmd_simulate(cli.s, ctx);
  else code = cmd_report(cli.s, ctx);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string config_text;
  json config = json::object();
  for (const auto& [k, v] : settings) {
    config_text += k + " = " + v + "\n";
    config[k] = v;
  }
  const std::string cfg_name = "config_" + name + ".txt";
  io::write_atomic(ctx.out_dir / cfg_name, [&](std::ostream& o) { o << config_text; });
  json manifest{{"tool", "sslab_cli"},
                {"version", kVersion},
                {"subcommand", name},
                {"argv", raw_args},
                {"config", config},
                {"config_file", cfg_name},
                {"seed", cli.s.seed},
                {"threads", io::default_thread_count()},
                {"eigen_version", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                {"compiler", compiler_id()},
                {"wall_time_seconds", secs},
                {"outputs", ctx.outputs},
                {"warnings", ctx.warnings},
                {"exit_code", code},
                {"results", ctx.extra}};
  io::write_atomic(ctx.out_dir / ("manifest_" + name + ".json"),
                   [&](std::ostream& o) { o << manifest.dump(2) << '\n'; });
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    return run(args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
}
