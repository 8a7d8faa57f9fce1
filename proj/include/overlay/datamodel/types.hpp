#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace overlay::data {

inline constexpr const char* kSchemaVersion = "1";

inline constexpr std::size_t kDimensionCount = 4;
inline constexpr std::size_t kConditionCount = 3;
inline constexpr std::size_t kOptionCount = 4;

// Order matters: allocation vectors and routing experts use (T, A, O, S).
enum class Dimension { Temporal = 0, Action = 1, Object = 2, Spatial = 3 };

enum class Condition { TextFree = 0, TextCongruent = 1, TextContradictory = 2 };

const char* to_string(Dimension d);
const char* to_string(Condition c);
std::optional<Dimension> dimension_from_string(std::string_view s);
std::optional<Condition> condition_from_string(std::string_view s);

// Option labels are the single letters "A".."D".
bool is_option_label(std::string_view s);
std::size_t option_index(std::string_view label);
std::string option_label(std::size_t index);

struct BenchmarkSample {
  std::string sample_id;
  std::string group_id;  // ties the condition variants of one video-question
  Dimension dimension = Dimension::Temporal;
  std::string attribute;
  int tier = 1;  // 1 perceptual, 2 semantic, 3 reasoning
  Condition condition = Condition::TextFree;
  std::array<std::string, kOptionCount> options{};  // answer texts for A..D
  std::string ground_truth;                         // option label
  std::optional<std::string> hallucination_option;  // contradictory only
  std::optional<int> scs;                           // contradictory only, 1..5
  std::array<double, kDimensionCount> allocation{};      // normalized to sum 1
  std::array<double, kDimensionCount> allocation_raw{};  // as ingested

  bool operator==(const BenchmarkSample&) const = default;
};

// Validates `raw` (nonnegative, 0 < sum <= 1 + 1e-9) and stores it together
// with its normalization. Throws std::invalid_argument on violation.
void set_allocation(BenchmarkSample& sample,
                    const std::array<double, kDimensionCount>& raw);

struct EvaluationRecord {
  std::string sample_id;
  std::string model_id;
  std::string prediction;  // option label
  std::optional<std::array<double, kOptionCount>> option_probs;  // sums to 1

  bool operator==(const EvaluationRecord&) const = default;
};

struct EvaluatedSample {
  BenchmarkSample sample;
  EvaluationRecord record;
  bool correct = false;       // prediction == ground_truth
  bool hallucinated = false;  // contradictory and prediction == hallucination
};

// Indices into the evaluated list, at most one per condition.
struct ConditionGroup {
  std::string group_id;
  std::array<std::optional<std::size_t>, kConditionCount> members{};

  const std::optional<std::size_t>& at(Condition c) const {
    return members[static_cast<std::size_t>(c)];
  }
  bool complete() const { return members[0] && members[1] && members[2]; }
};

}  // namespace overlay::data
