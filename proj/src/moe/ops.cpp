#include "overlay/moe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "overlay/numerics/ops.hpp"

namespace overlay::moe {

namespace {

num::Vec affine_apply(const Affine& a, const num::Vec& h) {
  num::Vec out = num::matvec(a.w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a.b.data[i];
  return out;
}

}  // namespace

num::Vec relevance_scores(const num::Vec& q_vis, const num::Mat& f_vis) {
  return num::cross_attention(q_vis, f_vis, f_vis).weights;
}

std::vector<std::size_t> topk_select(const num::Vec& scores, std::size_t k) {
  if (k == 0 || k > scores.size()) {
    throw std::invalid_argument("topk_select: k out of range");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  // Ties keep the lower index on top, so selection is deterministic.
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

num::Vec condition_patch(const num::Vec& patch, const num::Mat& query_tokens,
                         const Conditioner& cond) {
  if (query_tokens.rows == 0) {
    throw std::invalid_argument("condition_patch: empty query sequence");
  }
  const num::Vec q = num::matvec(cond.w_q, patch);
  num::Mat keys(query_tokens.rows, query_tokens.cols);
  num::Mat values(query_tokens.rows, query_tokens.cols);
  for (std::size_t m = 0; m < query_tokens.rows; ++m) {
    const num::Vec token = query_tokens.row(m);
    const num::Vec km = num::matvec(cond.w_k, token);
    const num::Vec vm = num::matvec(cond.w_v, token);
    std::copy(km.begin(), km.end(), keys.data.begin() + m * keys.cols);
    std::copy(vm.begin(), vm.end(), values.data.begin() + m * values.cols);
  }
  const num::Vec attended = num::cross_attention(q, keys, values).output;
  num::Vec out = patch;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += attended[i];
  return out;
}

PatchTriplet build_three_token(const num::Vec& vis_hat,
                               const num::Vec& ocr_hat) {
  if (vis_hat.size() != ocr_hat.size()) {
    throw std::invalid_argument("build_three_token: length mismatch");
  }
  PatchTriplet t;
  t.vis = vis_hat;
  t.ocr = ocr_hat;
  t.diff.resize(vis_hat.size());
  for (std::size_t i = 0; i < vis_hat.size(); ++i) {
    t.diff[i] = ocr_hat[i] - vis_hat[i];
  }
  return t;
}

num::Mat backbone_forward(const num::Mat& tokens,
                          const std::vector<BackboneLayer>& layers,
                          std::size_t begin, std::size_t end) {
  if (begin > end || end > layers.size()) {
    throw std::invalid_argument("backbone_forward: bad layer range");
  }
  num::Mat h = tokens;
  for (std::size_t l = begin; l < end; ++l) {
    const BackboneLayer& layer = layers[l];
    if (layer.w.cols != h.cols) {
      throw std::invalid_argument("backbone_forward: width mismatch");
    }
    for (std::size_t r = 0; r < h.rows; ++r) {
      num::Vec state = h.row(r);
      num::Vec z = num::matvec(layer.w, state);
      for (std::size_t i = 0; i < z.size(); ++i) {
        h.at(r, i) = state[i] + num::silu(z[i] + layer.b.data[i]);
      }
    }
  }
  return h;
}

double consistency(const num::Vec& a, const num::Vec& b) {
  // Zero vectors carry no signal to disagree with; they read as consistent.
  return num::cosine(a, b).value_or(1.0);
}

namespace {

// Shared by routing_logits and moe_layer so the traced pieces are the same
// values the routing decision saw.
TokenRouting route_token(const num::Vec& h, double c, const Affine& gate,
                         const Affine& cls) {
  if (!(c >= -1.0 && c <= 1.0)) {
    throw std::invalid_argument("routing_logits: consistency outside [-1, 1]");
  }
  TokenRouting rec;
  rec.c = c;
  rec.cw = (1.0 - c) / 2.0;
  rec.gate_logits = affine_apply(gate, h);
  rec.cls_dist = num::softmax(affine_apply(cls, h));
  rec.combined = rec.gate_logits;
  for (std::size_t i = 0; i < rec.combined.size(); ++i) {
    rec.combined[i] += rec.cw * rec.cls_dist[i];
  }
  rec.probs = num::softmax(rec.combined);
  rec.expert = route_top1(rec.combined);
  return rec;
}

}  // namespace

num::Vec routing_logits(const num::Vec& h, double c, const Affine& gate,
                        const Affine& cls) {
  return route_token(h, c, gate, cls).combined;
}

std::size_t route_top1(const num::Vec& g) {
  if (g.empty()) {
    throw std::invalid_argument("route_top1: empty logits");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g[i] > g[best]) best = i;
  }
  return best;
}

num::Vec expert_forward(const Expert& expert, const num::Vec& h) {
  return num::swiglu(h, expert.w_gate, expert.w_up, expert.w_down);
}

num::Mat moe_layer(const num::Mat& hidden,
                   const std::vector<double>& consistencies,
                   const MoEParams& params, RoutingTrace* trace) {
  if (consistencies.size() != hidden.rows) {
    throw std::invalid_argument("moe_layer: one consistency per token "
                                "required");
  }
  num::Mat out = hidden;
  if (trace != nullptr) {
    *trace = RoutingTrace{};
    trace->tokens.reserve(hidden.rows);
    trace->gate_only = true;
  }
  for (std::size_t t = 0; t < hidden.rows; ++t) {
    const num::Vec h = hidden.row(t);
    TokenRouting rec = route_token(h, consistencies[t], params.gate,
                                   params.cls);
    const num::Vec delta = expert_forward(params.experts[rec.expert], h);
    for (std::size_t i = 0; i < delta.size(); ++i) out.at(t, i) += delta[i];

    if (trace != nullptr) {
      trace->gate_only = trace->gate_only && rec.cw == 0.0;
      trace->expert_counts[rec.expert] += 1;
      for (std::size_t i = 0; i < 4; ++i) {
        trace->mean_probs[i] += rec.probs[i];
      }
      trace->tokens.push_back(std::move(rec));
    }
  }
  if (trace != nullptr && !trace->tokens.empty()) {
    for (double& p : trace->mean_probs) {
      p /= static_cast<double>(trace->tokens.size());
    }
  }
  return out;
}

}  // namespace overlay::moe
