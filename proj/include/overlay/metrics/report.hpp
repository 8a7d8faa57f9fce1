#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "overlay/datamodel/types.hpp"

namespace overlay::metrics {

// A scalar statistic that may be undefined (with a reason) or infinite
// (t statistics at |r| = 1).
struct MetricValue {
  std::optional<double> value;
  std::string reason;     // set when undefined
  bool infinite = false;

  bool defined() const { return value.has_value(); }
};

MetricValue defined_value(double v);
MetricValue undefined_value(std::string reason);

// Pearson correlation between cognitive tier and per-sample correctness over
// contradictory samples of one dimension.
struct LoadSensitivity {
  MetricValue r;
  MetricValue t;
  std::size_t n = 0;
};

enum class Regime {
  ActiveMisleading,       // correct when clean, flipped onto the planted option
  CompoundedFailure,      // already wrong without overlay text
  FacilitatedCorrectness, // correct under both conditions
  Other,                  // wrong under text but not on the planted option
};
inline constexpr std::size_t kRegimeCount = 4;

const char* to_string(Regime r);

// Per-group probability movement between the clean and contradictory runs.
struct ProbShiftEntry {
  std::string group_id;
  double delta_truth = 0.0;   // P(y|contra) - P(y|free)
  double delta_halluc = 0.0;  // P(o|contra) - P(o|free)
  Regime regime = Regime::Other;
};

struct ProbShiftSummary {
  std::array<std::size_t, kRegimeCount> regime_counts{};
  MetricValue mean_delta_truth;
  MetricValue mean_delta_halluc;
  std::size_t used_groups = 0;
  std::size_t skipped_groups = 0;  // missing a condition or missing probs
};

struct ReportCounts {
  std::size_t samples = 0;
  std::size_t contradictory = 0;
  std::size_t groups = 0;
  std::size_t paired_groups = 0;    // free + contradictory present
  std::size_t complete_groups = 0;  // all three conditions present
};

struct MetricReport {
  ReportCounts counts;
  MetricValue overall;
  // layer I
  MetricValue hrr, vyr, har, icr, sgli, tihr, tib;
  // layer II
  MetricValue scsi, whr, hsr;
  std::array<MetricValue, 5> hrc;  // index k-1 holds conflict level k
  // layer III, indexed by Dimension order (T, A, O, S)
  std::array<LoadSensitivity, data::kDimensionCount> load;
  // breakdowns
  std::array<MetricValue, data::kDimensionCount> accuracy_by_dimension;
  std::array<MetricValue, 5> accuracy_by_scs;
  ProbShiftSummary prob_shift;
};

using Evaluated = std::vector<data::EvaluatedSample>;
using Groups = std::vector<data::ConditionGroup>;

// Every rate returns undefined with a reason when its denominator population
// is empty.
MetricValue overall_accuracy(const Evaluated& input);
MetricValue hrr(const Evaluated& input);
MetricValue har(const Evaluated& input);
// Same quantity as har under this data model; computed independently from the
// raw predictions and asserted equal inside full_report.
MetricValue tihr(const Evaluated& input);
MetricValue tib(const Evaluated& input);
MetricValue scsi(const Evaluated& input);
MetricValue whr(const Evaluated& input);
MetricValue hsr(const Evaluated& input);
std::array<MetricValue, 5> hrc(const Evaluated& input);

MetricValue vyr(const Evaluated& input, const Groups& groups);
MetricValue icr(const Evaluated& input, const Groups& groups);
MetricValue sgli(const Evaluated& input, const Groups& groups);

LoadSensitivity load_sensitive(const Evaluated& input, data::Dimension dim);

std::vector<ProbShiftEntry> prob_shift(const Evaluated& input,
                                       const Groups& groups,
                                       std::size_t* skipped = nullptr);

MetricReport full_report(const Evaluated& input, const Groups& groups);

}  // namespace overlay::metrics
