#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sslab {

// Layout of the design vector. The intercept sits at index 0 so the fixed
// effects and the per-drug random effects share one algebra path; the
// exposure indicator is always last.
inline constexpr int kDesignDim = 5;
inline constexpr int kInterceptColumn = 0;
inline constexpr int kExposureColumn = 4;
inline constexpr int kCovariateDim = 3;  // age, sex, age x sex

using DesignVector = Eigen::Matrix<double, kDesignDim, 1>;

// One row of the aggregated pre/post count table.
struct StratumRecord {
  int drug_id = 0;
  int age_adult = 0;      // 1 = age > 18
  int sex_female = 0;
  int age_sex = 0;        // must equal age_adult * sex_female
  int post_exposure = 0;  // 1 = post window
  std::int64_t n_at_risk = 0;
  std::int64_t n_events = 0;

  friend bool operator==(const StratumRecord&, const StratumRecord&) = default;
};

// [1, age_adult, sex_female, age_sex, post_exposure]
DesignVector design_vector(const StratumRecord& record);

// Immutable, validated collection of strata. Safe to share across threads.
class Dataset {
 public:
  Dataset() = default;

  // Throws ValidationError on any record invariant violation. Drugs missing a
  // pre or post window only produce an entry in warnings().
  Dataset(std::vector<StratumRecord> records, std::vector<std::string> drug_names);

  const std::vector<StratumRecord>& records() const noexcept { return records_; }
  int n_drugs() const noexcept { return static_cast<int>(drug_names_.size()); }
  int covariate_dim() const noexcept { return kCovariateDim; }
  const std::vector<std::string>& drug_names() const noexcept { return drug_names_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  // Indices into records() for one drug, in file order.
  std::span<const std::size_t> records_of(int drug) const {
    return by_drug_[static_cast<std::size_t>(drug)];
  }

  // Design vectors, one per record, aligned with records().
  const std::vector<DesignVector>& designs() const noexcept { return designs_; }

 private:
  std::vector<StratumRecord> records_;
  std::vector<std::string> drug_names_;
  std::vector<std::vector<std::size_t>> by_drug_;
  std::vector<DesignVector> designs_;
  std::vector<std::string> warnings_;
};

// Stratum CSV: header `drug,age,sex,age_sex,time,n,events`. The drug column is
// a label; labels are mapped to dense indices in order of first appearance.
Dataset parse_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

// As load_dataset, but the drug column holds dense integer indices and the
// labels come from a `index,drug` sidecar.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::filesystem::path& drug_names_path);

void write_dataset(std::ostream& out, const Dataset& data);

std::vector<std::string> parse_drug_names(std::istream& in);
void write_drug_names(std::ostream& out, const std::vector<std::string>& names);

}  // namespace sslab
