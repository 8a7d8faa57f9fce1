#include "overlay/training/dataset.hpp"

#include <stdexcept>
#include <string>

#include "overlay/datamodel/types.hpp"
#include "overlay/moe/synth.hpp"
#include "overlay/numerics/rng.hpp"

namespace overlay::train {

std::vector<TrainingExample> gen_synthetic_dataset(std::size_t n,
                                                   const moe::ModelConfig&
                                                       config,
                                                   std::uint64_t seed,
                                                   double conflict_intensity,
                                                   double pi_dominant) {
  config.validate();
  if (n == 0) {
    throw std::invalid_argument("gen_synthetic_dataset: n must be positive");
  }
  if (!(conflict_intensity >= 0.0 && conflict_intensity <= 1.0)) {
    throw std::invalid_argument(
        "gen_synthetic_dataset: intensity outside [0, 1]");
  }
  if (!(pi_dominant >= 0.25 && pi_dominant <= 1.0)) {
    throw std::invalid_argument(
        "gen_synthetic_dataset: dominant pi mass outside [0.25, 1]");
  }

  num::Rng answers(num::derive_seed(seed, "dataset.answers"));
  std::vector<TrainingExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TrainingExample ex;
    // Round-robin keeps the four conflict dimensions balanced to within one.
    const auto dim = static_cast<data::Dimension>(i % 4);
    ex.answer = answers.index(4);

    const std::uint64_t sub =
        num::derive_seed(seed, "dataset.example." + std::to_string(i));
    auto streams =
        moe::synth_features(config, sub, {dim, conflict_intensity});
    ex.f_vis = std::move(streams.first);
    ex.f_ocr = std::move(streams.second);
    ex.query_tokens = moe::synth_query_tokens(config, sub);

    // The correct option's signal lives in both streams: it is part of the
    // video content, not of the planted text conflict.
    const num::Vec dir = moe::answer_direction(config.d, ex.answer);
    for (std::size_t r = 0; r < config.n_patches; ++r) {
      for (std::size_t c = 0; c < config.d; ++c) {
        ex.f_vis.at(r, c) += dir[c];
        ex.f_ocr.at(r, c) += dir[c];
      }
    }

    ex.conflict_dist.assign(4, 0.0);
    ex.conflict_dist[static_cast<std::size_t>(dim)] = 1.0;
    ex.pi.assign(4, (1.0 - pi_dominant) / 3.0);
    ex.pi[static_cast<std::size_t>(dim)] = pi_dominant;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace overlay::train
