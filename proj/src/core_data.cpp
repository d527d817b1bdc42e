#include "sslab/core_data.hpp"

#include "sslab/errors.hpp"
#include "sslab/io_util.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace sslab {

DesignVector design_vector(const StratumRecord& r) {
  DesignVector x;
  x << 1.0, r.age_adult, r.sex_female, r.age_sex, r.post_exposure;
  return x;
}

namespace {

std::string describe(const StratumRecord& r, const std::vector<std::string>& names) {
  const auto id = static_cast<std::size_t>(r.drug_id);
  const std::string label = id < names.size() ? names[id] : std::to_string(r.drug_id);
  std::ostringstream ss;
  ss << "stratum (drug=" << label << ", age=" << r.age_adult << ", sex=" << r.sex_female
     << ", time=" << r.post_exposure << ")";
  return ss.str();
}

bool is_binary(int v) { return v == 0 || v == 1; }

}  // namespace

Dataset::Dataset(std::vector<StratumRecord> records, std::vector<std::string> drug_names)
    : records_(std::move(records)), drug_names_(std::move(drug_names)) {
  if (drug_names_.empty()) throw ValidationError("dataset has no drugs");
  const auto n = drug_names_.size();
  by_drug_.assign(n, {});
  designs_.reserve(records_.size());
  std::set<std::tuple<int, int, int, int>> seen;
  std::vector<std::array<bool, 2>> has_window(n, {false, false});
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    if (r.drug_id < 0 || static_cast<std::size_t>(r.drug_id) >= n)
      throw ValidationError("drug id " + std::to_string(r.drug_id) + " out of range");
    if (!is_binary(r.age_adult) || !is_binary(r.sex_female) || !is_binary(r.age_sex) ||
        !is_binary(r.post_exposure))
      throw ValidationError(describe(r, drug_names_) + ": indicators must be 0 or 1");
    if (r.age_sex != r.age_adult * r.sex_female)
      throw ValidationError(describe(r, drug_names_) + ": age_sex != age * sex");
    if (r.n_at_risk < 0 || r.n_events < 0)
      throw ValidationError(describe(r, drug_names_) + ": negative count");
    if (r.n_events > r.n_at_risk)
      throw ValidationError(describe(r, drug_names_) + ": events (" +
                            std::to_string(r.n_events) + ") exceed at-risk count (" +
                            std::to_string(r.n_at_risk) + ")");
    if (!seen.emplace(r.drug_id, r.age_adult, r.sex_female, r.post_exposure).second)
      throw ValidationError(describe(r, drug_names_) + ": duplicate stratum");
    by_drug_[static_cast<std::size_t>(r.drug_id)].push_back(k);
    has_window[static_cast<std::size_t>(r.drug_id)][static_cast<std::size_t>(r.post_exposure)] = true;
    designs_.push_back(design_vector(r));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_window[i][0] || !has_window[i][1])
      warnings_.push_back("drug " + drug_names_[i] + " lacks a " +
                          (has_window[i][0] ? "post" : "pre") + "-exposure record");
  }
}

namespace {

constexpr const char* kHeader = "drug,age,sex,age_sex,time,n,events";

template <class T>
T parse_int(const std::string& field, std::size_t line, const char* what) {
  T v{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty())
    throw ParseError(std::string("column '") + what + "' is not an integer: '" + field + "'",
                     line);
  return v;
}

struct RawRow {
  std::string drug;
  StratumRecord record;
};

std::vector<RawRow> parse_rows(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty stratum file", 0);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    const auto cols = io::split_csv_line(line);
    std::string joined;
    for (std::size_t i = 0; i < cols.size(); ++i) joined += (i ? "," : "") + cols[i];
    if (joined != kHeader)
      throw ParseError(std::string("header must be '") + kHeader + "', got '" + line + "'", 1);
  }
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != 7)
      throw ParseError("expected 7 columns, got " + std::to_string(f.size()), line_no);
    if (f[0].empty()) throw ParseError("empty drug label", line_no);
    RawRow row;
    row.drug = f[0];
    row.record.age_adult = parse_int<int>(f[1], line_no, "age");
    row.record.sex_female = parse_int<int>(f[2], line_no, "sex");
    row.record.age_sex = parse_int<int>(f[3], line_no, "age_sex");
    row.record.post_exposure = parse_int<int>(f[4], line_no, "time");
    row.record.n_at_risk = parse_int<std::int64_t>(f[5], line_no, "n");
    row.record.n_events = parse_int<std::int64_t>(f[6], line_no, "events");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
  auto rows = parse_rows(in);
  std::unordered_map<std::string, int> index;
  std::vector<std::string> names;
  std::vector<StratumRecord> records;
  records.reserve(rows.size());
  for (auto& row : rows) {
    auto [it, inserted] = index.emplace(row.drug, static_cast<int>(names.size()));
    if (inserted) names.push_back(row.drug);
    row.record.drug_id = it->second;
    records.push_back(row.record);
  }
  return Dataset(std::move(records), std::move(names));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stratum file " + path.string());
  return parse_dataset(in);
}

Dataset load_dataset(const std::filesystem::path& path,
                     const std::filesystem::path& drug_names_path) {
  std::ifstream names_in(drug_names_path);
  if (!names_in) throw Error("cannot open drug-name file " + drug_names_path.string());
  auto names = parse_drug_names(names_in);
  std::ifstream in(path);
  if (!in) throw Error("cannot open stratum file " + path.string());
  auto rows = parse_rows(in);
  std::vector<StratumRecord> records;
  records.reserve(rows.size());
  std::size_t line = 1;
  for (auto& row : rows) {
    ++line;
    row.record.drug_id = parse_int<int>(row.drug, 0, "drug");
    if (row.record.drug_id < 0 || static_cast<std::size_t>(row.record.drug_id) >= names.size())
      throw ValidationError("drug index " + row.drug + " has no entry in " +
                            drug_names_path.string());
    records.push_back(row.record);
  }
  return Dataset(std::move(records), std::move(names));
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << kHeader << '\n';
  for (const auto& r : data.records()) {
    out << data.drug_names()[static_cast<std::size_t>(r.drug_id)] << ',' << r.age_adult << ','
        << r.sex_female << ',' << r.age_sex << ',' << r.post_exposure << ',' << r.n_at_risk
        << ',' << r.n_events << '\n';
  }
}

std::vector<std::string> parse_drug_names(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::map<int, std::string> by_index;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "index") continue;
    if (f.size() != 2) throw ParseError("expected 'index,drug'", line_no);
    const int idx = parse_int<int>(f[0], line_no, "index");
    if (!by_index.emplace(idx, f[1]).second)
      throw ParseError("duplicate index " + f[0], line_no);
  }
  std::vector<std::string> names;
  for (const auto& [idx, name] : by_index) {
    if (idx != static_cast<int>(names.size()))
      throw ValidationError("drug-name indices must be dense starting at 0");
    names.push_back(name);
  }
  return names;
}

void write_drug_names(std::ostream& out, const std::vector<std::string>& names) {
  out << "index,drug\n";
  for (std::size_t i = 0; i < names.size(); ++i) out << i << ',' << names[i] << '\n';
}

}  // namespace sslab
