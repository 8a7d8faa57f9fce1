#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "overlay/datamodel/types.hpp"
#include "overlay/moe/config.hpp"
#include "overlay/numerics/mat.hpp"

namespace overlay::moe {

// Planted overlay-text conflict for synthetic feature pairs. No dimension
// means congruent streams; intensity scales the planted residual.
struct ConflictSpec {
  std::optional<data::Dimension> dimension;
  double intensity = 0.0;  // in [0, 1]
};

// Unit direction for conflict dimension i (0..3) or answer option i - 4
// (4..7): disjoint coordinate blocks, so the eight signals are exactly
// orthogonal. Requires d >= 8.
num::Vec signal_direction(std::size_t d, std::size_t index);

inline num::Vec conflict_direction(std::size_t d, data::Dimension dim) {
  return signal_direction(d, static_cast<std::size_t>(dim));
}
inline num::Vec answer_direction(std::size_t d, std::size_t option) {
  return signal_direction(d, 4 + option);
}

// Deterministic (f_vis, f_ocr) pair: f_ocr starts as a copy of f_vis and,
// when a conflict is planted, each row gains intensity * (direction + a
// small per-row noise term). Intensity 0 leaves the streams bit-identical.
std::pair<num::Mat, num::Mat> synth_features(const ModelConfig& config,
                                             std::uint64_t seed,
                                             const ConflictSpec& conflict);

// Deterministic query-token block, n_query_tokens x d.
num::Mat synth_query_tokens(const ModelConfig& config, std::uint64_t seed);

}  // namespace overlay::moe
