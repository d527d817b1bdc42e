#pragma once

#include "sslab/core_data.hpp"
#include "sslab/rng.hpp"
#include "sslab/sampler.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sslab {

struct EffectGroup {
  int count = 0;
  double theta = 0.0;
};

// Stratum sizes. lognormal: round(exp(Normal(mu, sigma))), at least 1.
// fixed: every stratum gets `fixed_value`. file: values from `values`, used
// in stratum order and recycled. With paired_windows the pre and post strata
// of one (drug, age, sex) cell share a size, as in a within-person cohort.
struct MDistribution {
  enum class Kind { lognormal, fixed, file };
  Kind kind = Kind::lognormal;
  double mu = 12.25;
  double sigma = 1.0;
  std::int64_t fixed_value = 100000;
  std::vector<std::int64_t> values;
  bool paired_windows = true;
};

std::vector<std::int64_t> load_m_values(const std::filesystem::path& path);

struct SigmaDSpec {
  enum class Kind { identity, block };
  Kind kind = Kind::identity;
  int first_k = 30;
  double low = 0.25;
  double high = 0.40;
};

struct ScenarioSpec {
  std::string name = "custom";
  int n_drugs = 0;
  std::vector<EffectGroup> layout;  // assigned to drugs 0, 1, ... in order
  DesignVector beta = DesignVector::Zero();
  double random_intercept_sd = 0.3;
  MDistribution m;
  SigmaDSpec sigma_d;
  // SD multiplier of the optional correlated perturbation of signal effects.
  double tau = 0.0;
  int n_replicates = 50;
  std::uint64_t seed = 20240611;

  int n_signals() const;
  void validate() const;
};

DesignVector default_true_beta();
ScenarioSpec scenario1_spec(int n_drugs = 922);
ScenarioSpec scenario2_spec();

// Block matrix (unit diagonal, Uniform(low, high) off-diagonals among the
// first k drugs, zero elsewhere) after nearest_pd. Identity for identity specs.
Eigen::MatrixXd scenario_sigma_d(Rng& rng, const ScenarioSpec& spec);

struct GeneratedData {
  Dataset data;
  std::vector<std::uint8_t> truth;
  Eigen::VectorXd theta_x;
  Eigen::VectorXd theta_1;
  Eigen::MatrixXd sigma_d;
};

// Substreams of `seed`: "sigma_d", "theta", "m", "y".
GeneratedData generate_dataset(std::uint64_t seed, const ScenarioSpec& spec);
GeneratedData generate_dataset(Rng& rng, const ScenarioSpec& spec);

struct SelectionScore {
  int n_selected = 0;
  int true_positives = 0;
  double power = 0.0;
  double fdr = 0.0;
};

SelectionScore score_selection(const std::vector<int>& selected,
                               const std::vector<std::uint8_t>& truth);

// Both throw EmptyInputError on empty input. MAD is unscaled.
double median(std::vector<double> values);
double median_abs_deviation(const std::vector<double>& values);

enum class Method { eb_bonferroni, eb_bh, spike_slab, spike_slab_copres };
std::string_view to_string(Method m);
Method parse_method(std::string_view name);

// A target error rate: alpha for the frequentist arms, alpha_r for the
// Bayesian ones.
struct AlphaLevel {
  double alpha = 0.05;
  double alpha_r = 0.05;
};

struct BenchmarkOptions {
  std::vector<Method> methods{Method::eb_bonferroni, Method::eb_bh, Method::spike_slab,
                              Method::spike_slab_copres};
  std::vector<AlphaLevel> alphas{{0.05, 0.05}};
  SamplerConfig sampler;  // seed is replaced per replicate and method
  unsigned max_threads = 1;
};

struct MetricRow {
  Method method;
  double alpha;
  int replicate;
  bool ok = true;
  SelectionScore score;
  std::string message;
};

struct SummaryRow {
  Method method;
  double alpha;
  double n_selected_median = 0, n_selected_mad = 0;
  double power_median = 0, power_mad = 0;
  double fdr_median = 0, fdr_mad = 0;
  int n_ok = 0;
  int n_failed = 0;
};

struct BenchmarkResult {
  std::vector<MetricRow> rows;  // ordered by replicate, then alpha, then method
  std::vector<SummaryRow> summary;
};

BenchmarkResult run_benchmark(const ScenarioSpec& spec, const BenchmarkOptions& options);
std::vector<SummaryRow> summarize_metrics(const std::vector<MetricRow>& rows,
                                          const BenchmarkOptions& options);

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
// Medians and MADs at four decimals; the report renders these strings as-is.
void write_benchmark_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace sslab
