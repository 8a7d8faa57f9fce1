#include "overlay/training/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "overlay/numerics/ops.hpp"

namespace overlay::train {

namespace {

void check_simplex(const num::Vec& v, const char* what) {
  if (v.size() != 4) {
    throw std::invalid_argument(std::string(what) + ": expected 4 entries");
  }
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) {
      throw std::invalid_argument(std::string(what) +
                                  ": negative or NaN entry");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string(what) + ": does not sum to 1");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_cls >= 0.0 && lambda_sft >= 0.0 && lambda_aux >= 0.0)) {
    throw std::invalid_argument("loss weights: negative coefficient");
  }
}

double loss_lm(const num::Vec& option_logits, std::size_t answer_index) {
  if (option_logits.size() != 4) {
    throw std::invalid_argument("loss_lm: expected 4 logits");
  }
  if (answer_index >= 4) {
    throw std::invalid_argument("loss_lm: answer index out of range");
  }
  const num::Vec probs = num::softmax(option_logits);
  return -std::log(probs[answer_index]);
}

num::Vec attention_pool(const num::Vec& pool_query, const num::Mat& hidden,
                        const std::vector<std::uint8_t>& video_mask) {
  if (video_mask.size() != hidden.rows) {
    throw std::invalid_argument("attention_pool: one mask entry per row "
                                "required");
  }
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < hidden.rows; ++r) {
    if (video_mask[r] != 0) kept.push_back(r);
  }
  if (kept.empty()) {
    throw std::invalid_argument("attention_pool: every token is masked");
  }
  // Restriction to the kept rows gives masked tokens weight exactly zero.
  num::Mat sub(kept.size(), hidden.cols);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const num::Vec row = hidden.row(kept[i]);
    std::copy(row.begin(), row.end(), sub.data.begin() + i * sub.cols);
  }
  return num::cross_attention(pool_query, sub, sub).output;
}

double loss_cls(const num::Vec& pooled_video_logits,
                const num::Vec& target_dist) {
  if (pooled_video_logits.size() != 4) {
    throw std::invalid_argument("loss_cls: expected 4 logits");
  }
  check_simplex(target_dist, "loss_cls target");
  return num::kl_divergence(target_dist, num::softmax(pooled_video_logits));
}

double loss_sft(const moe::RoutingTrace& trace, const num::Vec& pi) {
  if (trace.tokens.empty()) {
    throw std::invalid_argument("loss_sft: empty routing trace");
  }
  check_simplex(pi, "loss_sft pi");
  const num::Vec mean(trace.mean_probs.begin(), trace.mean_probs.end());
  return num::kl_divergence(pi, mean);
}

double loss_aux(const moe::RoutingTrace& trace) {
  if (trace.tokens.empty()) {
    throw std::invalid_argument("loss_aux: empty routing trace");
  }
  const double total = static_cast<double>(trace.tokens.size());
  double sum = 0.0;
  for (std::size_t e = 0; e < 4; ++e) {
    const double f = static_cast<double>(trace.expert_counts[e]) / total;
    sum += f * trace.mean_probs[e];
  }
  return 4.0 * sum;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  if (!std::isfinite(parts.lm) || !std::isfinite(parts.cls) ||
      !std::isfinite(parts.sft) || !std::isfinite(parts.aux)) {
    throw std::invalid_argument("total_loss: non-finite part");
  }
  return parts.lm + weights.lambda_cls * parts.cls +
         weights.lambda_sft * parts.sft + weights.lambda_aux * parts.aux;
}

}  // namespace overlay::train
