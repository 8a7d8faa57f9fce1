#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "overlay/moe/config.hpp"
#include "overlay/numerics/mat.hpp"

namespace overlay::train {

struct TrainingExample {
  num::Mat f_vis;         // n_patches x d
  num::Mat f_ocr;         // n_patches x d
  num::Mat query_tokens;  // n_query_tokens x d
  std::size_t answer = 0;  // option index 0..3
  num::Vec conflict_dist;  // length-4 simplex over (T, A, O, S)
  num::Vec pi;             // length-4 allocation target
};

// Deterministic synthetic corpus: conflict dimensions round-robin (balanced
// to within one count), answers uniform, the answer option's direction
// planted in both streams, one-hot conflict supervision, and pi giving the
// conflict dimension the dominant mass.
std::vector<TrainingExample> gen_synthetic_dataset(
    std::size_t n, const moe::ModelConfig& config, std::uint64_t seed,
    double conflict_intensity = 1.0, double pi_dominant = 0.7);

}  // namespace overlay::train
