#pragma once

#include "sslab/sampler.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sslab {

using ChainSeries = std::vector<std::vector<double>>;  // one series per chain

// Split R-hat: every chain is cut into halves (the middle draw of an odd
// length is dropped). When the pooled within-half variance is zero the
// statistic is undefined; it is then reported as 1 if all halves agree (and
// *zero_variance set) or +inf if they do not.
double split_rhat(const ChainSeries& chains, bool* zero_variance = nullptr);

// Multi-chain ESS with Geyer's initial monotone sequence estimator.
double effective_sample_size(const ChainSeries& chains);

struct ParamDiagnostic {
  std::string name;
  double rhat = 1.0;
  double ess = 0.0;
  bool zero_variance = false;
  bool flagged = false;  // rhat above the report threshold
};

ParamDiagnostic diagnose(std::string name, const ChainSeries& chains,
                         double flag_threshold = 1.05);

struct DiagnosticsReport {
  std::vector<ParamDiagnostic> params;
  double max_rhat = 1.0;
  double min_ess = 0.0;
  long eta_clamps = 0;
  std::vector<AcceptanceStats> warmup_acceptance;
  std::vector<AcceptanceStats> sampling_acceptance;
  std::vector<std::string> warnings;

  bool any_rhat_above(double limit) const;
};

// Diagnostics for beta, the log-Cholesky vector, pi, the log posterior and,
// per drug, theta_x and delta.
DiagnosticsReport diagnostics(const PosteriorDraws& draws, const std::vector<std::string>& labels,
                              double flag_threshold = 1.05);

void write_diagnostics_json(std::ostream& out, const DiagnosticsReport& report);

}  // namespace sslab
