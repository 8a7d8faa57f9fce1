#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "overlay/numerics/mat.hpp"

namespace overlay::num {

// Stable sub-stream derivation so components seeded from one flag can be
// varied independently (FNV-1a over the tag, mixed with the base seed).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

// Deterministic generator: all distributions are hand-rolled so output does
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform();

  // Standard normal via Marsaglia polar, one cached value.
  double gaussian();

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  Vec gaussian_vec(std::size_t n, double scale = 1.0);
  Mat gaussian_mat(std::size_t rows, std::size_t cols, double scale = 1.0);

  // Fisher-Yates over [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace overlay::num
