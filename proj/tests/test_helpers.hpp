#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

inline std::filesystem::path data_dir() {
  const char* env = std::getenv("SSLAB_TEST_DATA");
  return env ? std::filesystem::path(env) : std::filesystem::path("tests/data");
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sslab_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}
