#include "overlay/numerics/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace overlay::num {

GradReport grad_check(Tape& tape, Id output, double step, double tol_abs,
                      double tol_rel, const std::string& corrupt_leaf) {
  if (step <= 0.0) {
    throw std::invalid_argument("grad_check: step must be positive");
  }
  const Mat& out = tape.value(output);
  if (out.rows != 1 || out.cols != 1) {
    throw std::invalid_argument("grad_check: output is not scalar");
  }

  tape.forward();
  tape.backward(output);

  // Snapshot analytic gradients before the perturbation sweeps overwrite
  // forward values.
  std::vector<Mat> analytic;
  const std::vector<Id> leaves = tape.leaves();
  analytic.reserve(leaves.size());
  for (Id leaf : leaves) analytic.push_back(tape.grad(leaf));

  GradReport report;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const Id leaf = leaves[li];
    LeafCheck check;
    check.name = tape.name(leaf);
    const Mat base = tape.value(leaf);
    for (std::size_t k = 0; k < base.data.size(); ++k) {
      Mat bumped = base;
      bumped.data[k] = base.data[k] + step;
      tape.set_leaf(leaf, bumped);
      tape.forward();
      const double f_plus = tape.value(output).data[0];

      bumped.data[k] = base.data[k] - step;
      tape.set_leaf(leaf, bumped);
      tape.forward();
      const double f_minus = tape.value(output).data[0];

      const double numeric = (f_plus - f_minus) / (2.0 * step);
      double ana = analytic[li].data[k];
      if (check.name == corrupt_leaf) ana += 1.0;
      const double err =
          std::abs(ana - numeric) / std::max(tol_abs, std::abs(numeric));
      if (err > check.max_error) {
        check.max_error = err;
        check.worst_index = k;
        check.analytic = ana;
        check.numeric = numeric;
      }
      ++report.entries_checked;
    }
    tape.set_leaf(leaf, base);
    check.pass = check.max_error < tol_rel;
    if (check.max_error > report.worst_error) {
      report.worst_error = check.max_error;
      report.worst_leaf = check.name;
    }
    report.pass = report.pass && check.pass;
    report.leaves.push_back(std::move(check));
  }
  tape.forward();
  return report;
}

}  // namespace overlay::num
