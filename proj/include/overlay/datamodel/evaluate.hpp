#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "overlay/datamodel/types.hpp"

namespace overlay::data {

struct CoverageSummary {
  std::size_t total_samples = 0;
  std::size_t evaluated = 0;  // samples with a record for the requested model
  std::size_t missing = 0;
};

struct JoinResult {
  std::vector<EvaluatedSample> evaluated;  // in sample order
  CoverageSummary coverage;
};

// Pairs each sample with its record for `model_id` and derives the
// correctness and hallucination flags. Records referencing unknown sample_ids
// are an error (all offenders listed); samples without a record are omitted
// and counted in the coverage summary.
JoinResult join(const std::vector<BenchmarkSample>& samples,
                const std::vector<EvaluationRecord>& records,
                const std::string& model_id);

// Groups evaluated samples by group_id, keeping first-appearance order.
// A duplicate (group, condition) pair is an error.
std::vector<ConditionGroup> group_conditions(
    const std::vector<EvaluatedSample>& evaluated);

// Maps an answer-similarity score in [0,1] onto the ordinal conflict tier:
// s < 0.5 -> 1, 0.5 <= s < 0.8 -> 2, s >= 0.8 -> 3.
int tier_from_similarity(double s);

// How a simulated responder behaves under each overlay condition. The
// remainder of each distribution is spread uniformly over the other options.
struct BehaviorProfile {
  double p_correct_free = 1.0;
  double p_correct_congruent = 1.0;
  double p_correct_contradictory = 1.0;
  double p_hallucinate = 0.0;  // contradictory samples only

  double p_correct(Condition c) const;
};

// Deterministic per seed; emits option_probs equal to the sampling
// distribution so probability-based metrics stay computable.
std::vector<EvaluationRecord> synthesize_responses(
    const std::vector<BenchmarkSample>& samples, const BehaviorProfile& profile,
    const std::string& model_id, std::uint64_t seed);

}  // namespace overlay::data
