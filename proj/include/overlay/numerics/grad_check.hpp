#pragma once

#include <string>
#include <vector>

#include "overlay/numerics/tape.hpp"

namespace overlay::num {

struct LeafCheck {
  std::string name;
  double max_error = 0.0;       // worst mixed error over the leaf's entries
  std::size_t worst_index = 0;
  double analytic = 0.0;        // gradient pair at the worst entry
  double numeric = 0.0;
  bool pass = true;
};

struct GradReport {
  bool pass = true;
  double worst_error = 0.0;
  std::string worst_leaf;
  std::size_t entries_checked = 0;
  std::vector<LeafCheck> leaves;
};

// Compares the tape's analytic gradients against central differences
// (f(x+h) - f(x-h)) / (2h) for every entry of every leaf. The mixed error is
// |g_a - g_n| / max(tol_abs, |g_n|); a leaf passes when its worst mixed error
// is below tol_rel. corrupt_leaf is a fault-injection hook: the named leaf's
// analytic gradient is perturbed before comparison so the failure path can be
// exercised.
GradReport grad_check(Tape& tape, Id output, double step = 1e-5,
                      double tol_abs = 1e-6, double tol_rel = 1e-4,
                      const std::string& corrupt_leaf = {});

}  // namespace overlay::num
