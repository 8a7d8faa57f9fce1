#pragma once

#include <cstddef>
#include <cstdint>

namespace overlay::moe {

// Desk-scale stand-in for the full model: widths small enough that every
// forward pass can run on a tape, large enough that routing behavior is
// non-trivial.
struct ModelConfig {
  std::size_t d = 32;            // shared feature width
  std::size_t n_patches = 32;    // visual patches per clip
  std::size_t k_select = 8;      // patches kept by relevance selection
  std::size_t backbone_depth = 6;
  std::size_t insert_layer = 3;  // MoE sits after this many backbone layers
  std::size_t expert_hidden = 64;
  std::size_t n_query_tokens = 4;
  std::uint64_t seed = 42;

  // Throws std::invalid_argument with the offending field named.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace overlay::moe
