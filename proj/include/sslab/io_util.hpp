#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sslab::io {

// Splits one CSV line on commas. No quoting support; surrounding spaces and a
// trailing '\r' are stripped from each field.
std::vector<std::string> split_csv_line(std::string_view line);

// Shortest text that reads back as the same double.
std::string format_double(double x);
// As format_double, with NaN written as NA; parse_double_na reads both back.
std::string format_double_na(double x);
double parse_double_na(const std::string& field);

// Writes through a sibling temporary file and renames it over `path`, so a
// reader never sees a partially written file.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

std::string read_text(const std::filesystem::path& path);

// Worker cap from SSLAB_NUM_THREADS (default: hardware concurrency, at least 1).
unsigned default_thread_count();

// Runs fn(0..n-1) on up to `max_threads` workers. Exceptions from workers are
// rethrown (the first one by index) after all tasks finish.
void parallel_for(std::size_t n, unsigned max_threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace sslab::io
