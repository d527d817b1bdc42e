#include "sslab/selection.hpp"

#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace sslab {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::increased: return "increased";
    case Direction::decreased: return "decreased";
    default: return "indeterminate";
  }
}

double empty_threshold() { return std::nextafter(1.0, 2.0); }

double expected_fdr(std::span<const double> pips, double t) {
  double v = 0.0;
  long r = 0;
  for (double p : pips) {
    if (p >= t) {
      v += 1.0 - p;
      ++r;
    }
  }
  return v / static_cast<double>(std::max(r, 1L));
}

double expected_fnr(std::span<const double> pips, double t) {
  double f = 0.0;
  long r = 0;
  for (double p : pips) {
    if (p >= t) {
      ++r;
    } else {
      f += p;
    }
  }
  const long rest = static_cast<long>(pips.size()) - r;
  return f / static_cast<double>(std::max(rest, 1L));
}

namespace {

void check_pips(std::span<const double> pips) {
  for (double p : pips)
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("PIPs must lie in [0, 1]");
}

}  // namespace

std::vector<CurvePoint> fdr_curve(std::span<const double> pips) {
  check_pips(pips);
  std::vector<double> sorted(pips.begin(), pips.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t n = sorted.size();
  // suffix[k] = sum of sorted[k..n), accumulated from the small end.
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] + sorted[k];

  std::vector<CurvePoint> curve;
  curve.push_back({empty_threshold(), 0, 0.0, suffix[0] / static_cast<double>(std::max<std::size_t>(n, 1))});
  double miss = 0.0;  // sum of (1 - p) over the selected prefix
  std::size_t k = 0;
  while (k < n) {
    const double t = sorted[k];
    while (k < n && sorted[k] == t) miss += 1.0 - sorted[k++];
    const double rest = static_cast<double>(std::max<std::size_t>(n - k, 1));
    curve.push_back({t, static_cast<int>(k), miss / static_cast<double>(k), suffix[k] / rest});
  }
  return curve;
}

SelectionResult optimal_threshold(std::span<const double> pips, double alpha_r) {
  if (!(alpha_r > 0.0 && alpha_r <= 1.0)) throw DomainError("alpha_r must lie in (0, 1]");
  const auto curve = fdr_curve(pips);
  SelectionResult res;
  res.alpha_r = alpha_r;
  const CurvePoint* best = nullptr;
  // Curve runs from large to small thresholds, so "<=" prefers the smaller one on ties.
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const auto& c = curve[k];
    if (c.expected_fdr > alpha_r) continue;
    if (!best || c.expected_fnr <= best->expected_fnr) best = &c;
  }
  res.feasible = best != nullptr;
  if (!best) best = &curve.front();
  res.threshold = best->threshold;
  res.expected_fdr = best->expected_fdr;
  res.expected_fnr = best->expected_fnr;
  for (std::size_t i = 0; i < pips.size(); ++i)
    if (pips[i] >= res.threshold) res.selected.push_back(static_cast<int>(i));
  return res;
}

Direction classify_direction(double or_mean) {
  if (or_mean > 1.0) return Direction::increased;
  if (or_mean < 1.0) return Direction::decreased;
  return Direction::indeterminate;
}

Direction classify_direction(const DrugSummary& summary) { return classify_direction(summary.or_mean); }

void classify_selection(SelectionResult& result, const std::vector<DrugSummary>& summary) {
  result.directions.clear();
  for (int i : result.selected)
    result.directions.push_back(classify_direction(summary.at(static_cast<std::size_t>(i))));
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "threshold,n_selected,expected_fdr,expected_fnr\n";
  for (const auto& c : curve)
    out << io::format_double(c.threshold) << ',' << c.n_selected << ','
        << io::format_double(c.expected_fdr) << ',' << io::format_double(c.expected_fnr) << '\n';
}

void write_selection_report(std::ostream& out, std::string_view method,
                            const std::vector<ReportRow>& rows,
                            const std::vector<std::pair<std::string, std::string>>& header) {
  const auto format_double = io::format_double_na;
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "method,drug,pip,p_value,or_mean,or_low,or_high,selected,direction\n";
  for (const auto& r : rows) {
    out << method << ',' << r.drug << ',' << format_double(r.pip) << ','
        << format_double(r.p_value) << ',' << format_double(r.or_mean) << ','
        << format_double(r.or_low) << ',' << format_double(r.or_high) << ','
        << (r.selected ? 1 : 0) << ',' << (r.selected ? to_string(r.direction) : "") << '\n';
  }
}

std::vector<ReportRow> bayes_report_rows(const std::vector<DrugSummary>& summary,
                                         const SelectionResult& result) {
  std::vector<ReportRow> rows;
  std::vector<bool> sel(summary.size(), false);
  for (int i : result.selected) sel.at(static_cast<std::size_t>(i)) = true;
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto& s = summary[i];
    rows.push_back({s.label, s.pip, std::nan(""), s.or_mean, s.or_low, s.or_high, sel[i],
                    classify_direction(s)});
  }
  return rows;
}

}  // namespace sslab
