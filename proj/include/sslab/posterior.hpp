#pragma once

#include "sslab/sampler.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sslab {

// Per-drug posterior summary over all kept draws of all chains.
// The marginal OR columns treat excluded draws as OR = 1 and are the primary
// summary; the *_included columns condition on delta_i = 1 and are NaN when
// the drug was never included.
struct DrugSummary {
  int drug = 0;
  std::string label;
  double pip = 0.0;
  double theta_mean = 0.0;
  double or_mean = 1.0;
  double or_low = 1.0;
  double or_high = 1.0;
  double or_mean_included = 0.0;
  double or_low_included = 0.0;
  double or_high_included = 0.0;
  long n_included_draws = 0;
};

std::size_t total_draws(const PosteriorDraws& draws);

// Mean of delta_i over all kept draws, chains pooled. Throws EmptyInputError
// when there are no draws.
std::vector<double> compute_pip(const PosteriorDraws& draws);

// Equal-tailed credible intervals use type-7 (linear interpolation) quantiles.
std::vector<DrugSummary> summarize(const PosteriorDraws& draws,
                                   const std::vector<std::string>& labels,
                                   double cri_level = 0.95);

// Type-7 sample quantile; `values` is sorted in place. Throws on empty input.
double quantile_sorted(std::vector<double>& values, double p);

void write_summary_csv(std::ostream& out, const std::vector<DrugSummary>& summary);
std::vector<DrugSummary> parse_summary_csv(std::istream& in);

// One row per kept iteration per chain: chain, draw, log posterior, pi,
// beta_1..5, log_chol_*, then theta_<drug> and delta_<drug> for every drug.
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws,
                     const std::vector<std::string>& labels);

}  // namespace sslab
