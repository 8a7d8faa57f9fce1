#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "overlay/moe/config.hpp"
#include "overlay/numerics/mat.hpp"

namespace overlay::moe {

// Patch-text conditioner: single-head cross attention from a patch vector
// into the query-token sequence. All three projections are d x d.
struct Conditioner {
  num::Mat w_q, w_k, w_v;

  bool operator==(const Conditioner&) const = default;
};

// One stand-in backbone layer: h <- h + silu(w.h + b). Frozen during
// training, mirroring the frozen language model the adapter sits inside.
struct BackboneLayer {
  num::Mat w;  // d x d
  num::Mat b;  // d x 1

  bool operator==(const BackboneLayer&) const = default;
};

// Affine head, out x d weight plus out x 1 bias.
struct Affine {
  num::Mat w;
  num::Mat b;

  bool operator==(const Affine&) const = default;
};

// SwiGLU feed-forward expert: w_down . (silu(w_gate.x) * (w_up.x)).
struct Expert {
  num::Mat w_gate;  // hidden x d
  num::Mat w_up;    // hidden x d
  num::Mat w_down;  // d x hidden

  bool operator==(const Expert&) const = default;
};

struct MoEParams {
  num::Mat q_vis;  // d x 1 relevance query for patch selection
  num::Mat q_ocr;  // d x 1, carried for symmetry (selection uses q_vis)
  Conditioner cond_vis;
  Conditioner cond_ocr;
  std::vector<BackboneLayer> backbone;  // frozen
  Affine gate;                          // 4 x d routing gate
  Affine cls;                           // 4 x d inconsistency-type classifier
  std::array<Expert, 4> experts;        // temporal, action, object, spatial
  Affine answer;                        // 4 x d option head on pooled states
  num::Mat pool_query;                  // d x 1 learned attention-pool query

  bool operator==(const MoEParams&) const = default;
};

// Seeded N(0, 1/sqrt(d)) init from independent sub-streams per tensor.
// Both conditioners are initialized identically so that with no text
// conflict the vis and ocr streams stay bit-for-bit in agreement.
MoEParams init_params(const ModelConfig& config);

// Enumerates every tensor with a stable dotted name and its frozen flag,
// in a fixed order. Shared by the optimizer, the checkpoint format, and
// the tape registration, so names line up across all three.
using ParamVisitor = void (*)(void*, const std::string&, num::Mat&, bool);
void visit_params(MoEParams& params, void* ctx, ParamVisitor visit);

template <typename Fn>
void for_each_param(MoEParams& params, Fn&& fn) {
  visit_params(params, &fn, [](void* ctx, const std::string& name,
                               num::Mat& m, bool frozen) {
    (*static_cast<Fn*>(ctx))(name, m, frozen);
  });
}

template <typename Fn>
void for_each_param(const MoEParams& params, Fn&& fn) {
  // Read-only visitation reuses the mutable walker; the callback takes const.
  for_each_param(const_cast<MoEParams&>(params),
                 [&fn](const std::string& name, const num::Mat& m,
                       bool frozen) { fn(name, m, frozen); });
}

struct Checkpoint {
  ModelConfig config;
  MoEParams params;
};

// Versioned JSON with the config embedded; serialization is byte-stable
// (same checkpoint in, same bytes out).
std::string checkpoint_to_json(const ModelConfig& config,
                               const MoEParams& params);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const MoEParams& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace overlay::moe
