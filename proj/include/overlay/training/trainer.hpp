#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "overlay/moe/config.hpp"
#include "overlay/moe/forward.hpp"
#include "overlay/moe/params.hpp"
#include "overlay/numerics/tape.hpp"
#include "overlay/training/dataset.hpp"
#include "overlay/training/losses.hpp"

namespace overlay::train {

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 2;
  std::size_t warmup_steps = 80;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;
  std::size_t batch_size = 16;
  // 0 derives the step count from epochs and the dataset size.
  std::size_t max_steps = 0;
  LossWeights weights;

  void validate() const;
};

struct StepStats {
  std::size_t step = 0;
  double lm = 0.0;
  double cls = 0.0;
  double sft = 0.0;
  double aux = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  moe::MoEParams params;
  std::vector<StepStats> history;
};

// Deterministic Adam-style loop with decoupled weight decay (rank-2 tensors
// only), linear warmup into a constant rate, and the backbone held frozen.
// Throws std::runtime_error naming the step if the loss goes non-finite.
TrainResult train(const TrainConfig& config, const moe::ModelConfig& model,
                  const moe::MoEParams& init,
                  const std::vector<TrainingExample>& dataset);

// Loss graph for one example on an already-registered tape; shared by the
// trainer and the gradient checks.
struct ExampleLoss {
  num::Id total;
  LossParts parts;
};
ExampleLoss build_example_loss(num::Tape& tape, const moe::ModelConfig& model,
                               const moe::TapeParams& tp,
                               const TrainingExample& example,
                               const LossWeights& weights);

struct EvalStats {
  double classifier_accuracy = 0.0;
  double expert_agreement = 0.0;
  std::array<double, 4> expert_shares{};  // aggregate over all tokens
  double max_expert_share = 0.0;
};

// Held-out behavior: classifier argmax vs the conflict label, dominant
// expert among inconsistent tokens vs the conflict label, and aggregate
// expert load shares.
EvalStats evaluate(const moe::ModelConfig& model, const moe::MoEParams& params,
                   const std::vector<TrainingExample>& dataset);

// Line-delimited history records: step, lm, cls, sft, aux, total.
std::string history_to_lines(const std::vector<StepStats>& history);

}  // namespace overlay::train
