#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sslab {

using Rng = std::mt19937_64;

// Seed derivation for named substreams. Every random stream in a run is
// seeded as derive_seed(parent, name, index), e.g. chain c of a fit uses
// derive_seed(seed, "chain", c) and replicate r of a benchmark uses
// derive_seed(seed, "replicate", r). The mix is FNV-1a over the name
// followed by two rounds of splitmix64, so streams are decorrelated even for
// adjacent indices.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name,
                          std::uint64_t index);

inline Rng make_rng(std::uint64_t parent, std::string_view name,
                    std::uint64_t index) {
  return Rng(derive_seed(parent, name, index));
}

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

// Beta(a, b) via two gamma draws.
double beta_draw(Rng& rng, double a, double b);

}  // namespace sslab
