#include "overlay/moe/forward.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "overlay/numerics/ops.hpp"

namespace overlay::moe {

namespace {

void check_inputs(const ModelConfig& config, const num::Mat& f_vis,
                  const num::Mat& f_ocr, const num::Mat& query_tokens) {
  config.validate();
  if (f_vis.rows != config.n_patches || f_vis.cols != config.d) {
    throw std::invalid_argument("forward: f_vis shape mismatch");
  }
  if (f_ocr.rows != f_vis.rows || f_ocr.cols != f_vis.cols) {
    throw std::invalid_argument("forward: f_ocr shape mismatch");
  }
  if (query_tokens.rows != config.n_query_tokens ||
      query_tokens.cols != config.d) {
    throw std::invalid_argument("forward: query_tokens shape mismatch");
  }
}

num::Vec affine_apply(const Affine& a, const num::Vec& h) {
  num::Vec out = num::matvec(a.w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a.b.data[i];
  return out;
}

void set_row(num::Mat& m, std::size_t r, const num::Vec& v) {
  std::copy(v.begin(), v.end(), m.data.begin() + r * m.cols);
}

}  // namespace

ForwardResult forward(const ModelConfig& config, const MoEParams& params,
                      const num::Mat& f_vis, const num::Mat& f_ocr,
                      const num::Mat& query_tokens) {
  check_inputs(config, f_vis, f_ocr, query_tokens);
  const std::size_t k = config.k_select;
  const std::size_t m = config.n_query_tokens;
  const std::size_t n_tokens = 3 * k + m;

  const num::Vec scores = relevance_scores(params.q_vis.to_vec(), f_vis);
  const std::vector<std::size_t> selected = topk_select(scores, k);

  num::Mat tokens(n_tokens, config.d);
  double diff_max = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t patch = selected[i];
    const num::Vec vis_hat =
        condition_patch(f_vis.row(patch), query_tokens, params.cond_vis);
    const num::Vec ocr_hat =
        condition_patch(f_ocr.row(patch), query_tokens, params.cond_ocr);
    const PatchTriplet triplet = build_three_token(vis_hat, ocr_hat);
    for (double x : triplet.diff) diff_max = std::max(diff_max, std::abs(x));
    set_row(tokens, 3 * i + 0, triplet.vis);
    set_row(tokens, 3 * i + 1, triplet.ocr);
    set_row(tokens, 3 * i + 2, triplet.diff);
  }
  for (std::size_t q = 0; q < m; ++q) {
    set_row(tokens, 3 * k + q, query_tokens.row(q));
  }

  const num::Mat pre =
      backbone_forward(tokens, params.backbone, 0, config.insert_layer);

  // Consistency is read off the vis/ocr pair of each triplet; the diff and
  // query tokens carry no pairing and route as fully consistent.
  std::vector<double> consistencies(n_tokens, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double c = consistency(pre.row(3 * i), pre.row(3 * i + 1));
    consistencies[3 * i] = c;
    consistencies[3 * i + 1] = c;
  }

  ForwardResult result;
  const num::Mat mixed =
      moe_layer(pre, consistencies, params, &result.trace);
  const num::Mat post = backbone_forward(mixed, params.backbone,
                                         config.insert_layer,
                                         config.backbone_depth);

  num::Vec pooled(config.d, 0.0);
  for (std::size_t r = 0; r < post.rows; ++r) {
    for (std::size_t i = 0; i < config.d; ++i) pooled[i] += post.at(r, i);
  }
  for (double& x : pooled) x /= static_cast<double>(n_tokens);
  result.option_logits = affine_apply(params.answer, pooled);

  // The inconsistency-type classifier reads the pre-MoE video tokens only;
  // query positions never contribute weight.
  num::Mat video(3 * k, config.d);
  for (std::size_t r = 0; r < 3 * k; ++r) set_row(video, r, pre.row(r));
  const num::Vec pooled_video =
      num::cross_attention(params.pool_query.to_vec(), video, video).output;
  result.pooled_video_logits = affine_apply(params.cls, pooled_video);

  result.trace.selected = selected;
  result.trace.diff_max_abs = diff_max;
  return result;
}

TapeParams register_params(num::Tape& tape, const MoEParams& params) {
  TapeParams tp;
  // Frozen tensors enter as constants: they join the graph but report zero
  // gradient, so the trainable set is exactly the set of named leaves.
  auto reg = [&tape](const num::Mat& m, const std::string& name,
                     bool frozen) {
    return frozen ? tape.constant(m) : tape.leaf(m, name);
  };
  tp.q_vis = reg(params.q_vis, "q_vis", false);
  tp.q_ocr = reg(params.q_ocr, "q_ocr", false);
  tp.cond_vis = {reg(params.cond_vis.w_q, "cond_vis.w_q", false),
                 reg(params.cond_vis.w_k, "cond_vis.w_k", false),
                 reg(params.cond_vis.w_v, "cond_vis.w_v", false)};
  tp.cond_ocr = {reg(params.cond_ocr.w_q, "cond_ocr.w_q", false),
                 reg(params.cond_ocr.w_k, "cond_ocr.w_k", false),
                 reg(params.cond_ocr.w_v, "cond_ocr.w_v", false)};
  for (const BackboneLayer& layer : params.backbone) {
    tp.backbone.emplace_back(reg(layer.w, "", true), reg(layer.b, "", true));
  }
  tp.gate = {reg(params.gate.w, "gate.w", false),
             reg(params.gate.b, "gate.b", false)};
  tp.cls = {reg(params.cls.w, "cls.w", false),
            reg(params.cls.b, "cls.b", false)};
  const char* expert_names[4] = {"experts.temporal", "experts.action",
                                 "experts.object", "experts.spatial"};
  for (std::size_t e = 0; e < 4; ++e) {
    const std::string tag = expert_names[e];
    tp.experts[e] = {reg(params.experts[e].w_gate, tag + ".w_gate", false),
                     reg(params.experts[e].w_up, tag + ".w_up", false),
                     reg(params.experts[e].w_down, tag + ".w_down", false)};
  }
  tp.answer = {reg(params.answer.w, "answer.w", false),
               reg(params.answer.b, "answer.b", false)};
  tp.pool_query = reg(params.pool_query, "pool_query", false);
  return tp;
}

TapeForward build_forward(num::Tape& tape, const ModelConfig& config,
                          const TapeParams& tp, const num::Mat& f_vis,
                          const num::Mat& f_ocr,
                          const num::Mat& query_tokens) {
  check_inputs(config, f_vis, f_ocr, query_tokens);
  const std::size_t k = config.k_select;
  const std::size_t m = config.n_query_tokens;
  const std::size_t d = config.d;

  const num::Id inv_sqrt_d =
      tape.scalar(1.0 / std::sqrt(static_cast<double>(d)));
  const num::Id neg_one = tape.scalar(-1.0);
  const num::Id one = tape.scalar(1.0);
  const num::Id half = tape.scalar(0.5);
  const num::Id zero = tape.scalar(0.0);

  // Patch selection is data dependent; it is decided here from the current
  // leaf values and stays frozen in the recorded graph.
  const num::Vec scores =
      relevance_scores(tape.value(tp.q_vis).to_vec(), f_vis);
  const std::vector<std::size_t> selected = topk_select(scores, k);

  std::vector<num::Id> queries(m);
  for (std::size_t q = 0; q < m; ++q) {
    queries[q] = tape.constant(num::Mat::col_vec(query_tokens.row(q)));
  }

  // Projected keys and values are patch independent; build them once per
  // conditioner.
  struct Projected {
    std::vector<num::Id> keys, values;
  };
  auto project = [&](const TapeCond& cond) {
    Projected p;
    for (std::size_t q = 0; q < m; ++q) {
      p.keys.push_back(tape.matmul(cond.w_k, queries[q]));
      p.values.push_back(tape.matmul(cond.w_v, queries[q]));
    }
    return p;
  };
  const Projected proj_vis = project(tp.cond_vis);
  const Projected proj_ocr = project(tp.cond_ocr);

  auto condition = [&](num::Id patch, const TapeCond& cond,
                       const Projected& proj) {
    const num::Id q = tape.matmul(cond.w_q, patch);
    std::vector<num::Id> attn_scores(m);
    for (std::size_t i = 0; i < m; ++i) {
      attn_scores[i] =
          tape.mul(tape.matmul(q, proj.keys[i], true, false), inv_sqrt_d);
    }
    const num::Id weights = tape.softmax_of(attn_scores);
    const num::Id value_mat = tape.stack_rows(proj.values);
    const num::Id attended = tape.matmul(value_mat, weights, true, false);
    return tape.add(patch, attended);
  };

  std::vector<num::Id> tokens;
  tokens.reserve(3 * k + m);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t patch = selected[i];
    const num::Id p_vis =
        tape.constant(num::Mat::col_vec(f_vis.row(patch)));
    const num::Id p_ocr =
        tape.constant(num::Mat::col_vec(f_ocr.row(patch)));
    const num::Id vis_hat = condition(p_vis, tp.cond_vis, proj_vis);
    const num::Id ocr_hat = condition(p_ocr, tp.cond_ocr, proj_ocr);
    const num::Id diff = tape.add(ocr_hat, tape.mul(vis_hat, neg_one));
    tokens.push_back(vis_hat);
    tokens.push_back(ocr_hat);
    tokens.push_back(diff);
  }
  for (std::size_t q = 0; q < m; ++q) tokens.push_back(queries[q]);

  auto backbone_span = [&](std::vector<num::Id> h, std::size_t begin,
                           std::size_t end) {
    for (std::size_t l = begin; l < end; ++l) {
      const auto& [w, b] = tp.backbone[l];
      for (num::Id& t : h) {
        t = tape.add(t, tape.silu(tape.add(tape.matmul(w, t), b)));
      }
    }
    return h;
  };
  const std::vector<num::Id> pre =
      backbone_span(tokens, 0, config.insert_layer);

  // cw = (1 - c) / 2 per token; vis and ocr positions of triplet i share
  // the cosine of their pre-MoE states, everything else pins c = 1.
  std::vector<num::Id> cw(pre.size(), zero);
  std::vector<double> c_values(pre.size(), 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    const num::Id c = tape.cosine(pre[3 * i], pre[3 * i + 1]);
    const num::Id w =
        tape.mul(tape.add(one, tape.mul(c, neg_one)), half);
    cw[3 * i] = w;
    cw[3 * i + 1] = w;
    const double cv = tape.value(c).data[0];
    c_values[3 * i] = cv;
    c_values[3 * i + 1] = cv;
  }

  TapeForward out;
  out.trace.gate_only = true;
  std::vector<num::Id> mixed(pre.size());
  for (std::size_t t = 0; t < pre.size(); ++t) {
    const num::Id h = pre[t];
    const num::Id gate_logits =
        tape.add(tape.matmul(tp.gate.w, h), tp.gate.b);
    const num::Id cls_dist =
        tape.softmax(tape.add(tape.matmul(tp.cls.w, h), tp.cls.b));
    const num::Id g = tape.add(gate_logits, tape.mul(cls_dist, cw[t]));
    const num::Id probs = tape.softmax(g);
    out.token_probs.push_back(probs);

    // Hard routing is frozen into the graph like the patch selection.
    const std::size_t e = route_top1(tape.value(g).to_vec());
    const TapeExpert& exp = tp.experts[e];
    const num::Id mid = tape.mul(tape.silu(tape.matmul(exp.w_gate, h)),
                                 tape.matmul(exp.w_up, h));
    mixed[t] = tape.add(h, tape.matmul(exp.w_down, mid));

    TokenRouting rec;
    rec.c = c_values[t];
    rec.cw = tape.value(cw[t]).data[0];
    rec.gate_logits = tape.value(gate_logits).to_vec();
    rec.cls_dist = tape.value(cls_dist).to_vec();
    rec.combined = tape.value(g).to_vec();
    rec.probs = tape.value(probs).to_vec();
    rec.expert = e;
    out.trace.gate_only = out.trace.gate_only && rec.cw == 0.0;
    out.trace.expert_counts[e] += 1;
    for (std::size_t i = 0; i < 4; ++i) {
      out.trace.mean_probs[i] += rec.probs[i];
    }
    out.trace.tokens.push_back(std::move(rec));
  }
  for (double& p : out.trace.mean_probs) {
    p /= static_cast<double>(pre.size());
  }

  const std::vector<num::Id> post =
      backbone_span(mixed, config.insert_layer, config.backbone_depth);

  const num::Id pooled = tape.mean_of(post);
  out.option_logits = tape.add(tape.matmul(tp.answer.w, pooled),
                               tp.answer.b);

  std::vector<num::Id> video_scores(3 * k);
  for (std::size_t t = 0; t < 3 * k; ++t) {
    video_scores[t] =
        tape.mul(tape.matmul(pre[t], tp.pool_query, true, false), inv_sqrt_d);
  }
  const num::Id video_weights = tape.softmax_of(video_scores);
  const num::Id video_mat =
      tape.stack_rows({pre.begin(), pre.begin() + 3 * k});
  const num::Id pooled_video =
      tape.matmul(video_mat, video_weights, true, false);
  out.pooled_video_logits =
      tape.add(tape.matmul(tp.cls.w, pooled_video), tp.cls.b);

  out.mean_probs = tape.mean_of(out.token_probs);
  out.trace.selected = selected;
  double diff_max = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (double x : tape.value(tokens[3 * i + 2]).data) {
      diff_max = std::max(diff_max, std::abs(x));
    }
  }
  out.trace.diff_max_abs = diff_max;
  return out;
}

}  // namespace overlay::moe
