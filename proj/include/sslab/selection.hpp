#pragma once

#include "sslab/posterior.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sslab {

enum class Direction { increased, decreased, indeterminate };

std::string_view to_string(Direction d);

// Threshold used for the empty selection: the smallest double above 1.
double empty_threshold();

double expected_fdr(std::span<const double> pips, double t);
double expected_fnr(std::span<const double> pips, double t);

struct SelectionResult {
  double threshold = 0.0;
  std::vector<int> selected;  // ascending drug indices
  double expected_fdr = 0.0;
  double expected_fnr = 0.0;
  double alpha_r = 0.0;
  bool feasible = false;  // false when no nonempty selection meets alpha_r
  std::vector<Direction> directions;  // parallel to `selected`, filled by classify_selection
};

// Minimizes expected FNR subject to expected FDR <= alpha_r over thresholds at
// the distinct PIP values; ties go to the smaller threshold. Throws DomainError
// unless 0 < alpha_r <= 1 and every PIP lies in [0, 1].
SelectionResult optimal_threshold(std::span<const double> pips, double alpha_r);

Direction classify_direction(double or_mean);
Direction classify_direction(const DrugSummary& summary);
void classify_selection(SelectionResult& result, const std::vector<DrugSummary>& summary);

struct CurvePoint {
  double threshold;
  int n_selected;
  double expected_fdr;
  double expected_fnr;
};

// Both expected rates at every candidate threshold, in decreasing threshold order.
std::vector<CurvePoint> fdr_curve(std::span<const double> pips);
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

// One row per drug. `p_values` may be empty (Bayesian methods); `summary`
// supplies PIPs and OR summaries.
struct ReportRow {
  std::string drug;
  double pip;
  double p_value;
  double or_mean;
  double or_low;
  double or_high;
  bool selected;
  Direction direction;
};

void write_selection_report(std::ostream& out, std::string_view method,
                            const std::vector<ReportRow>& rows,
                            const std::vector<std::pair<std::string, std::string>>& header);

std::vector<ReportRow> bayes_report_rows(const std::vector<DrugSummary>& summary,
                                         const SelectionResult& result);

}  // namespace sslab
