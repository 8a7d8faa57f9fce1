#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "overlay/moe/config.hpp"
#include "overlay/moe/ops.hpp"
#include "overlay/moe/params.hpp"
#include "overlay/numerics/tape.hpp"

namespace overlay::moe {

struct ForwardResult {
  num::Vec option_logits;        // answer head over mean-pooled final states
  num::Vec pooled_video_logits;  // classifier over attention-pooled pre-MoE
                                 // video tokens (query positions masked)
  RoutingTrace trace;
};

// Full pipeline: relevance selection, per-patch conditioning, three-token
// assembly, backbone to the insert layer, consistency-routed MoE, rest of
// the backbone, heads. Shapes: f_vis/f_ocr n_patches x d, query_tokens
// n_query_tokens x d.
ForwardResult forward(const ModelConfig& config, const MoEParams& params,
                      const num::Mat& f_vis, const num::Mat& f_ocr,
                      const num::Mat& query_tokens);

// Tape registration of every parameter tensor; frozen tensors become
// constants so the optimizer never sees gradients for them.
struct TapeCond {
  num::Id w_q, w_k, w_v;
};
struct TapeAffine {
  num::Id w, b;
};
struct TapeExpert {
  num::Id w_gate, w_up, w_down;
};
struct TapeParams {
  num::Id q_vis, q_ocr;
  TapeCond cond_vis, cond_ocr;
  std::vector<std::pair<num::Id, num::Id>> backbone;  // (w, b) per layer
  TapeAffine gate, cls;
  std::array<TapeExpert, 4> experts;
  TapeAffine answer;
  num::Id pool_query;
};

TapeParams register_params(num::Tape& tape, const MoEParams& params);

// Differentiable forward over registered params. Data-dependent choices
// (patch selection, expert argmax) are made from the values present while
// recording and stay frozen in the graph, so re-running forward() after a
// leaf nudge keeps the same routing. Matches the plain forward exactly on
// the same inputs.
struct TapeForward {
  num::Id option_logits;             // 4 x 1
  num::Id pooled_video_logits;       // 4 x 1
  std::vector<num::Id> token_probs;  // per token, softmax(g), 4 x 1
  num::Id mean_probs;                // token-mean of softmax(g), 4 x 1
  RoutingTrace trace;                // values observed while recording
};

TapeForward build_forward(num::Tape& tape, const ModelConfig& config,
                          const TapeParams& tp, const num::Mat& f_vis,
                          const num::Mat& f_ocr,
                          const num::Mat& query_tokens);

}  // namespace overlay::moe
