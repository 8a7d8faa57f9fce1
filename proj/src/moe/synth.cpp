#include "overlay/moe/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "overlay/numerics/rng.hpp"

namespace overlay::moe {

num::Vec signal_direction(std::size_t d, std::size_t index) {
  if (d < 8) {
    throw std::invalid_argument("signal_direction: d must be at least 8");
  }
  if (index >= 8) {
    throw std::invalid_argument("signal_direction: index out of range");
  }
  // Eight disjoint coordinate blocks: four conflict dimensions, four answer
  // options. Disjoint support makes the planted signals exactly orthogonal.
  const std::size_t block = d / 8;
  num::Vec dir(d, 0.0);
  const double unit = 1.0 / std::sqrt(static_cast<double>(block));
  for (std::size_t i = index * block; i < (index + 1) * block; ++i) {
    dir[i] = unit;
  }
  return dir;
}

std::pair<num::Mat, num::Mat> synth_features(const ModelConfig& config,
                                             std::uint64_t seed,
                                             const ConflictSpec& conflict) {
  config.validate();
  if (!(conflict.intensity >= 0.0 && conflict.intensity <= 1.0)) {
    throw std::invalid_argument("synth_features: intensity outside [0, 1]");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.d));
  num::Rng base(num::derive_seed(seed, "synth_features.vis"));
  num::Mat f_vis = base.gaussian_mat(config.n_patches, config.d, scale);
  num::Mat f_ocr = f_vis;

  // Intensity 0 or no dimension leaves the pair bit-identical; the planted
  // residual is the dimension direction plus a little per-patch noise so
  // rows do not all disagree in exactly the same way.
  if (conflict.dimension.has_value() && conflict.intensity > 0.0) {
    const num::Vec dir = conflict_direction(config.d, *conflict.dimension);
    num::Rng noise(num::derive_seed(seed, "synth_features.conflict"));
    for (std::size_t r = 0; r < f_ocr.rows; ++r) {
      const num::Vec jitter = noise.gaussian_vec(config.d, scale);
      for (std::size_t i = 0; i < config.d; ++i) {
        f_ocr.at(r, i) += conflict.intensity * (dir[i] + 0.05 * jitter[i]);
      }
    }
  }
  return {std::move(f_vis), std::move(f_ocr)};
}

num::Mat synth_query_tokens(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.d));
  num::Rng rng(num::derive_seed(seed, "synth_features.query"));
  return rng.gaussian_mat(config.n_query_tokens, config.d, scale);
}

}  // namespace overlay::moe
