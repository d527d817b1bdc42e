#include "sslab/posterior.hpp"

#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace sslab {

std::size_t total_draws(const PosteriorDraws& draws) {
  std::size_t n = 0;
  for (const auto& c : draws) n += c.n_draws();
  return n;
}

namespace {

int checked_drug_count(const PosteriorDraws& draws) {
  if (draws.empty() || total_draws(draws) == 0) throw EmptyInputError("no posterior draws");
  const int n = draws.front().n_drugs;
  for (const auto& c : draws)
    if (c.n_drugs != n) throw DimensionError("chains disagree on the number of drugs");
  return n;
}

}  // namespace

double quantile_sorted(std::vector<double>& values, double p) {
  if (values.empty()) throw EmptyInputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> compute_pip(const PosteriorDraws& draws) {
  const int n = checked_drug_count(draws);
  std::vector<double> pip(static_cast<std::size_t>(n), 0.0);
  for (const auto& c : draws)
    for (std::size_t d = 0; d < c.n_draws(); ++d)
      for (int i = 0; i < n; ++i) pip[static_cast<std::size_t>(i)] += c.included(d, i) ? 1.0 : 0.0;
  const auto total = static_cast<double>(total_draws(draws));
  for (auto& p : pip) p /= total;
  return pip;
}

std::vector<DrugSummary> summarize(const PosteriorDraws& draws,
                                   const std::vector<std::string>& labels, double cri_level) {
  const int n = checked_drug_count(draws);
  if (!(cri_level > 0.0 && cri_level < 1.0)) throw DomainError("credible level must lie in (0, 1)");
  const double lo_p = 0.5 * (1.0 - cri_level);
  const double hi_p = 1.0 - lo_p;
  const std::vector<double> pip = compute_pip(draws);
  const std::size_t total = total_draws(draws);
  std::vector<DrugSummary> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> all, inc;
  all.reserve(total);
  for (int i = 0; i < n; ++i) {
    all.clear();
    inc.clear();
    double theta_sum = 0.0;
    for (const auto& c : draws) {
      for (std::size_t d = 0; d < c.n_draws(); ++d) {
        const double th = c.theta(d, i);
        theta_sum += th;
        all.push_back(std::exp(th));
        if (c.included(d, i)) inc.push_back(std::exp(th));
      }
    }
    DrugSummary s;
    s.drug = i;
    s.label = static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)]
                                                          : std::to_string(i);
    s.pip = pip[static_cast<std::size_t>(i)];
    s.theta_mean = theta_sum / static_cast<double>(total);
    double or_sum = 0.0;
    for (double v : all) or_sum += v;
    s.or_mean = or_sum / static_cast<double>(total);
    s.or_low = quantile_sorted(all, lo_p);
    s.or_high = quantile_sorted(all, hi_p);
    s.n_included_draws = static_cast<long>(inc.size());
    if (inc.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.or_mean_included = s.or_low_included = s.or_high_included = nan;
    } else {
      double sum = 0.0;
      for (double v : inc) sum += v;
      s.or_mean_included = sum / static_cast<double>(inc.size());
      s.or_low_included = quantile_sorted(inc, lo_p);
      s.or_high_included = quantile_sorted(inc, hi_p);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {
constexpr const char* kSummaryHeader =
    "drug,pip,or_mean,or_low,or_high,theta_mean,or_mean_included,or_low_included,"
    "or_high_included,n_included_draws";
}

void write_summary_csv(std::ostream& out, const std::vector<DrugSummary>& summary) {
  const auto format_double = io::format_double_na;
  out << kSummaryHeader << '\n';
  for (const auto& s : summary) {
    out << s.label << ',' << format_double(s.pip) << ',' << format_double(s.or_mean) << ','
        << format_double(s.or_low) << ',' << format_double(s.or_high) << ','
        << format_double(s.theta_mean) << ',' << format_double(s.or_mean_included) << ','
        << format_double(s.or_low_included) << ',' << format_double(s.or_high_included) << ','
        << s.n_included_draws << '\n';
  }
}

std::vector<DrugSummary> parse_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty summary file", 1);
  const auto header = io::split_csv_line(line);
  if (header.size() < 5 || header[0] != "drug" || header[1] != "pip")
    throw ParseError("summary header must start with drug,pip,or_mean,or_low,or_high", 1);
  std::vector<DrugSummary> out;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields", lineno);
    DrugSummary s;
    s.drug = static_cast<int>(out.size());
    s.label = f[0];
    try {
      s.pip = io::parse_double_na(f[1]);
      s.or_mean = io::parse_double_na(f[2]);
      s.or_low = io::parse_double_na(f[3]);
      s.or_high = io::parse_double_na(f[4]);
      if (f.size() >= 10) {
        s.theta_mean = io::parse_double_na(f[5]);
        s.or_mean_included = io::parse_double_na(f[6]);
        s.or_low_included = io::parse_double_na(f[7]);
        s.or_high_included = io::parse_double_na(f[8]);
        s.n_included_draws = std::stol(f[9]);
      }
    } catch (const std::exception&) {
      throw ParseError("non-numeric field", lineno);
    }
    if (!(s.pip >= 0.0 && s.pip <= 1.0)) throw ParseError("pip outside [0, 1]", lineno);
    out.push_back(std::move(s));
  }
  return out;
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws,
                     const std::vector<std::string>& labels) {
  const int n = checked_drug_count(draws);
  const int lc = draws.front().log_chol_len;
  out << "chain,draw,log_posterior,pi";
  for (int k = 1; k <= kDesignDim; ++k) out << ",beta_" << k;
  for (int k = 0; k < lc; ++k) out << ",log_chol_" << k;
  for (int i = 0; i < n; ++i) out << ",theta_" << labels[static_cast<std::size_t>(i)];
  for (int i = 0; i < n; ++i) out << ",delta_" << labels[static_cast<std::size_t>(i)];
  out << '\n';
  using io::format_double;
  for (const auto& c : draws) {
    for (std::size_t d = 0; d < c.n_draws(); ++d) {
      out << c.chain_id << ',' << d << ',' << format_double(c.log_posterior[d]) << ','
          << format_double(c.pi[d]);
      for (int k = 0; k < kDesignDim; ++k)
        out << ',' << format_double(c.beta[d * kDesignDim + static_cast<std::size_t>(k)]);
      for (int k = 0; k < lc; ++k)
        out << ',' << format_double(c.log_chol[d * static_cast<std::size_t>(lc) + static_cast<std::size_t>(k)]);
      for (int i = 0; i < n; ++i) out << ',' << format_double(c.theta(d, i));
      for (int i = 0; i < n; ++i) out << ',' << (c.included(d, i) ? 1 : 0);
      out << '\n';
    }
  }
}

}  // namespace sslab
