#include "overlay/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "overlay/moe/forward.hpp"
#include "overlay/moe/ops.hpp"
#include "overlay/numerics/rng.hpp"
#include "overlay/training/adam.hpp"

namespace overlay::train {

void TrainConfig::validate() const {
  // lr 0 is allowed: a zero-rate run is the pinned no-op baseline.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train config: bad learning rate");
  }
  if (epochs < 1) {
    throw std::invalid_argument("train config: epochs must be at least 1");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("train config: batch size must be positive");
  }
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("train config: negative weight decay");
  }
  weights.validate();
}

void adam_update(num::Mat& param, AdamState& state, const num::Mat& grad,
                 std::size_t step_one_based, double lr, double weight_decay,
                 bool apply_decay) {
  if (state.m.size() != param.size()) {
    state.m = num::Mat(param.rows, param.cols);
    state.v = num::Mat(param.rows, param.cols);
  }
  if (apply_decay && weight_decay != 0.0) {
    const double keep = 1.0 - lr * weight_decay;
    for (double& x : param.data) x *= keep;
  }
  const double bc1 =
      1.0 - std::pow(kAdamBeta1, static_cast<double>(step_one_based));
  const double bc2 =
      1.0 - std::pow(kAdamBeta2, static_cast<double>(step_one_based));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data[i];
    state.m.data[i] = kAdamBeta1 * state.m.data[i] + (1.0 - kAdamBeta1) * g;
    state.v.data[i] =
        kAdamBeta2 * state.v.data[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = state.m.data[i] / bc1;
    const double v_hat = state.v.data[i] / bc2;
    param.data[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

ExampleLoss build_example_loss(num::Tape& tape, const moe::ModelConfig& model,
                               const moe::TapeParams& tp,
                               const TrainingExample& example,
                               const LossWeights& weights) {
  weights.validate();
  const moe::TapeForward tf = moe::build_forward(
      tape, model, tp, example.f_vis, example.f_ocr, example.query_tokens);
  if (example.answer >= 4) {
    throw std::invalid_argument("build_example_loss: answer out of range");
  }

  const num::Id l_lm = tape.cross_entropy(tf.option_logits, example.answer);
  const num::Id target = tape.constant(num::Mat::col_vec(example.conflict_dist));
  const num::Id l_cls =
      tape.kl_div(target, tape.softmax(tf.pooled_video_logits));
  const num::Id pi = tape.constant(num::Mat::col_vec(example.pi));
  const num::Id l_sft = tape.kl_div(pi, tf.mean_probs);

  // f_e is the routed-token fraction; the hard assignment is frozen in the
  // recorded graph, so f enters as a constant and only mean_probs carries
  // gradient, as in the switch-style balance loss.
  num::Vec fractions(4);
  const double total = static_cast<double>(tf.trace.tokens.size());
  for (std::size_t e = 0; e < 4; ++e) {
    fractions[e] = static_cast<double>(tf.trace.expert_counts[e]) / total;
  }
  const num::Id f_row = tape.constant(num::Mat::row_vec(fractions));
  const num::Id l_aux =
      tape.mul(tape.matmul(f_row, tf.mean_probs), tape.scalar(4.0));

  const num::Id weighted = tape.add(
      l_lm,
      tape.add(tape.mul(l_cls, tape.scalar(weights.lambda_cls)),
               tape.add(tape.mul(l_sft, tape.scalar(weights.lambda_sft)),
                        tape.mul(l_aux, tape.scalar(weights.lambda_aux)))));

  ExampleLoss out;
  out.total = weighted;
  out.parts.lm = tape.value(l_lm).data[0];
  out.parts.cls = tape.value(l_cls).data[0];
  out.parts.sft = tape.value(l_sft).data[0];
  out.parts.aux = tape.value(l_aux).data[0];
  return out;
}

TrainResult train(const TrainConfig& config, const moe::ModelConfig& model,
                  const moe::MoEParams& init,
                  const std::vector<TrainingExample>& dataset) {
  config.validate();
  model.validate();
  if (dataset.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }

  TrainResult result;
  result.params = init;

  const std::size_t per_epoch =
      (dataset.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t steps =
      config.max_steps > 0 ? config.max_steps : config.epochs * per_epoch;
  result.history.reserve(steps);

  std::map<std::string, AdamState> opt_state;
  num::Rng batches(num::derive_seed(config.seed, "train.batches"));

  for (std::size_t step = 0; step < steps; ++step) {
    // Linear warmup into a constant rate.
    double lr = config.learning_rate;
    if (config.warmup_steps > 0 && step + 1 < config.warmup_steps) {
      lr *= static_cast<double>(step + 1) /
            static_cast<double>(config.warmup_steps);
    }

    std::map<std::string, num::Mat> grad_sum;
    StepStats stats;
    stats.step = step;
    stats.lr = lr;

    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const TrainingExample& ex = dataset[batches.index(dataset.size())];
      num::Tape tape;
      const moe::TapeParams tp = moe::register_params(tape, result.params);
      const ExampleLoss loss =
          build_example_loss(tape, model, tp, ex, config.weights);

      const double value = tape.value(loss.total).data[0];
      if (!std::isfinite(value)) {
        throw std::runtime_error("train: non-finite loss at step " +
                                 std::to_string(step));
      }
      stats.lm += loss.parts.lm;
      stats.cls += loss.parts.cls;
      stats.sft += loss.parts.sft;
      stats.aux += loss.parts.aux;
      stats.total += value;

      tape.backward(loss.total);
      // Accumulation stays in example order: deterministic sums.
      for (num::Id leaf : tape.leaves()) {
        const num::Mat& g = tape.grad(leaf);
        auto [it, fresh] =
            grad_sum.try_emplace(tape.name(leaf), g.rows, g.cols);
        if (fresh) {
          it->second = g;
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) {
            it->second.data[i] += g.data[i];
          }
        }
      }
    }

    const double inv = 1.0 / static_cast<double>(config.batch_size);
    stats.lm *= inv;
    stats.cls *= inv;
    stats.sft *= inv;
    stats.aux *= inv;
    stats.total *= inv;

    moe::for_each_param(
        result.params,
        [&](const std::string& name, num::Mat& param, bool frozen) {
          if (frozen) return;
          num::Mat& g = grad_sum.at(name);
          for (double& x : g.data) x *= inv;
          // Decay stays off biases and vector params (queries): rank-2 only.
          const bool decay = param.rows > 1 && param.cols > 1;
          adam_update(param, opt_state[name], g, step + 1, lr,
                      config.weight_decay, decay);
        });

    result.history.push_back(stats);
  }
  return result;
}

EvalStats evaluate(const moe::ModelConfig& model, const moe::MoEParams& params,
                   const std::vector<TrainingExample>& dataset) {
  if (dataset.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  EvalStats stats;
  std::array<std::size_t, 4> aggregate{};
  std::size_t total_tokens = 0;
  std::size_t correct = 0;
  std::size_t agreed = 0;

  for (const TrainingExample& ex : dataset) {
    const moe::ForwardResult r =
        moe::forward(model, params, ex.f_vis, ex.f_ocr, ex.query_tokens);

    const std::size_t label = moe::route_top1(ex.conflict_dist);
    if (moe::route_top1(r.pooled_video_logits) == label) ++correct;

    // Dominant expert among the tokens the consistency signal flagged; when
    // nothing is flagged the whole layer is gate-only and every token counts.
    std::array<std::size_t, 4> flagged{};
    bool any_flagged = false;
    for (const moe::TokenRouting& tok : r.trace.tokens) {
      if (tok.cw > 0.0) {
        flagged[tok.expert] += 1;
        any_flagged = true;
      }
    }
    const auto& counts = any_flagged ? flagged : r.trace.expert_counts;
    std::size_t dominant = 0;
    for (std::size_t e = 1; e < 4; ++e) {
      if (counts[e] > counts[dominant]) dominant = e;
    }
    if (dominant == label) ++agreed;

    for (std::size_t e = 0; e < 4; ++e) aggregate[e] += r.trace.expert_counts[e];
    total_tokens += r.trace.tokens.size();
  }

  const double n = static_cast<double>(dataset.size());
  stats.classifier_accuracy = static_cast<double>(correct) / n;
  stats.expert_agreement = static_cast<double>(agreed) / n;
  for (std::size_t e = 0; e < 4; ++e) {
    stats.expert_shares[e] =
        static_cast<double>(aggregate[e]) / static_cast<double>(total_tokens);
    stats.max_expert_share =
        std::max(stats.max_expert_share, stats.expert_shares[e]);
  }
  return stats;
}

std::string history_to_lines(const std::vector<StepStats>& history) {
  std::string out = "step lm cls sft aux total\n";
  char line[192];
  for (const StepStats& s : history) {
    std::snprintf(line, sizeof(line), "%zu %.9g %.9g %.9g %.9g %.9g\n",
                  s.step, s.lm, s.cls, s.sft, s.aux, s.total);
    out += line;
  }
  return out;
}

}  // namespace overlay::train
