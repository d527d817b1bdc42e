#pragma once

#include "sslab/core_data.hpp"
#include "sslab/selection.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sslab {

// Simplified empirical-Bayes comparator. Each drug gets its own logistic fit
// (0.5 added to zero-event strata and subtracted from all-event strata); the
// exposure coefficient and its Wald SE are then shrunk toward zero with a
// method-of-moments prior variance. This is a stand-in for the mixed-model
// marginal-likelihood EB approach, not a reimplementation of it.
struct EbFit {
  std::vector<double> estimate;     // raw per-drug log-OR (NaN if not estimable)
  std::vector<double> se;
  std::vector<double> shrinkage;    // tau2 / (tau2 + se^2)
  std::vector<double> shrunken;
  std::vector<double> shrunken_se;  // sqrt(shrinkage) * se
  std::vector<double> z;
  std::vector<double> p_value;
  std::vector<std::uint8_t> estimable;
  double tau2 = 0.0;
  int n_estimable = 0;
  bool degenerate = false;  // dataset without any events: every p is 1
};

struct DrugLogitFit {
  bool estimable = false;
  double estimate = 0.0;
  double se = 0.0;
};

// Per-drug logistic fit on the design columns that vary within the drug.
DrugLogitFit fit_drug_logit(const Dataset& data, int drug);

EbFit eb_fit(const Dataset& data, unsigned max_threads = 1);

// Both return ascending indices. Throws DomainError on p-values outside [0, 1].
std::vector<int> bonferroni_select(std::span<const double> pvals, double alpha);
std::vector<int> bh_select(std::span<const double> pvals, double alpha);

std::vector<ReportRow> eb_report_rows(const EbFit& fit, const std::vector<std::string>& labels,
                                      const std::vector<int>& selected);

}  // namespace sslab
