#pragma once

#include <cstddef>

#include "overlay/numerics/mat.hpp"

namespace overlay::train {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct AdamState {
  num::Mat m;  // first-moment accumulator
  num::Mat v;  // second-moment accumulator
};

// One bias-corrected Adam step with decoupled weight decay. Decay is applied
// to the pre-update parameter (multiply by 1 - lr * wd first), matching the
// usual decoupled formulation. step_one_based is the 1-based step count used
// for bias correction.
void adam_update(num::Mat& param, AdamState& state, const num::Mat& grad,
                 std::size_t step_one_based, double lr, double weight_decay,
                 bool apply_decay);

}  // namespace overlay::train
