#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "overlay/moe/ops.hpp"
#include "overlay/numerics/mat.hpp"

namespace overlay::train {

struct LossWeights {
  double lambda_cls = 1.1;
  double lambda_sft = 1.0;
  double lambda_aux = 0.01;

  // Throws std::invalid_argument on a negative weight.
  void validate() const;
};

struct LossParts {
  double lm = 0.0;
  double cls = 0.0;
  double sft = 0.0;
  double aux = 0.0;
};

// -ln softmax(option_logits)[answer]; 4 logits, answer in 0..3.
double loss_lm(const num::Vec& option_logits, std::size_t answer_index);

// Learned-query attention over the unmasked (video) rows of hidden; rows
// with video_mask == 0 get weight exactly zero. Throws when every row is
// masked out.
num::Vec attention_pool(const num::Vec& pool_query, const num::Mat& hidden,
                        const std::vector<std::uint8_t>& video_mask);

// KL(target || softmax(pooled_video_logits)); target is a length-4 simplex.
double loss_cls(const num::Vec& pooled_video_logits,
                const num::Vec& target_dist);

// KL(pi || token-mean of softmax(g)); trace must be nonempty.
double loss_sft(const moe::RoutingTrace& trace, const num::Vec& pi);

// 4 * sum_e f_e * mean_prob_e; minimum 1 at perfect balance. Nonempty trace.
double loss_aux(const moe::RoutingTrace& trace);

// lm + lambda_cls * cls + lambda_sft * sft + lambda_aux * aux.
// Throws on non-finite parts.
double total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace overlay::train
