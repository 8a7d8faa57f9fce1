#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "overlay/moe/params.hpp"
#include "overlay/numerics/mat.hpp"

namespace overlay::moe {

// Attention weights of the relevance query over patch rows; a simplex over
// the n_patches rows of f_vis.
num::Vec relevance_scores(const num::Vec& q_vis, const num::Mat& f_vis);

// Indices of the k largest scores, returned in ascending index order.
// Ties break toward the lower index. Throws when k is 0 or exceeds n.
std::vector<std::size_t> topk_select(const num::Vec& scores, std::size_t k);

// Residual text conditioning: patch + cross_attention(W_q.patch over the
// projected query tokens). Throws on an empty query sequence.
num::Vec condition_patch(const num::Vec& patch, const num::Mat& query_tokens,
                         const Conditioner& cond);

struct PatchTriplet {
  num::Vec vis;   // conditioned visual patch
  num::Vec ocr;   // conditioned overlay-text patch
  num::Vec diff;  // ocr - vis, exactly
};

PatchTriplet build_three_token(const num::Vec& vis_hat,
                               const num::Vec& ocr_hat);

// Token-wise residual stand-in backbone over layers [begin, end):
// h <- h + silu(w.h + b). begin == end returns the input unchanged.
num::Mat backbone_forward(const num::Mat& tokens,
                          const std::vector<BackboneLayer>& layers,
                          std::size_t begin, std::size_t end);

// Cosine of the two hidden states; either vector zero (the degenerate
// case) reads as fully consistent, 1.
double consistency(const num::Vec& a, const num::Vec& b);

// g = gate(h) + cw * softmax(cls(h)) with cw = (1 - c) / 2.
// Requires c in [-1, 1].
num::Vec routing_logits(const num::Vec& h, double c, const Affine& gate,
                        const Affine& cls);

// Argmax; ties break toward the lower index (temporal, action, object,
// spatial order).
std::size_t route_top1(const num::Vec& g);

num::Vec expert_forward(const Expert& expert, const num::Vec& h);

struct TokenRouting {
  double c = 1.0;   // consistency fed to this token
  double cw = 0.0;  // classifier weight (1 - c) / 2
  num::Vec gate_logits;
  num::Vec cls_dist;  // softmax of classifier logits
  num::Vec combined;  // g
  num::Vec probs;     // softmax of g
  std::size_t expert = 0;
};

struct RoutingTrace {
  std::vector<TokenRouting> tokens;
  std::array<std::size_t, 4> expert_counts{};
  std::array<double, 4> mean_probs{};  // token-mean of softmax(g)
  // Filled by the full forward pass, not by moe_layer:
  std::vector<std::size_t> selected;  // patch indices kept by topk
  double diff_max_abs = 0.0;          // max |ocr_hat - vis_hat| entry
  bool gate_only = false;             // every token had cw == 0
};

// Applies the routed expert residually to every token. consistencies must
// supply one value per token row (non-patch tokens use 1).
num::Mat moe_layer(const num::Mat& hidden,
                   const std::vector<double>& consistencies,
                   const MoEParams& params, RoutingTrace* trace = nullptr);

}  // namespace overlay::moe
