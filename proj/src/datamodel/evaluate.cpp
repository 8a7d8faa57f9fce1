#include "overlay/datamodel/evaluate.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "overlay/numerics/rng.hpp"

namespace overlay::data {

namespace {

std::string join_ids(const std::set<std::string>& ids) {
  std::string out;
  for (const std::string& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string("behavior profile: ") + name +
                                " must be in [0,1]");
  }
}

}  // namespace

JoinResult join(const std::vector<BenchmarkSample>& samples,
                const std::vector<EvaluationRecord>& records,
                const std::string& model_id) {
  std::unordered_map<std::string, std::size_t> sample_index;
  sample_index.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!sample_index.emplace(samples[i].sample_id, i).second) {
      throw std::invalid_argument("join: duplicate sample_id '" +
                                  samples[i].sample_id + "'");
    }
  }

  std::set<std::string> dangling;
  std::unordered_map<std::size_t, const EvaluationRecord*> chosen;
  for (const EvaluationRecord& r : records) {
    const auto it = sample_index.find(r.sample_id);
    if (it == sample_index.end()) {
      dangling.insert(r.sample_id);
      continue;
    }
    if (r.model_id != model_id) continue;
    if (!chosen.emplace(it->second, &r).second) {
      throw std::invalid_argument("join: duplicate record for sample_id '" +
                                  r.sample_id + "' and model '" + model_id +
                                  "'");
    }
  }
  if (!dangling.empty()) {
    throw std::invalid_argument(
        "join: records reference unknown sample_ids: " + join_ids(dangling));
  }

  JoinResult result;
  result.coverage.total_samples = samples.size();
  result.evaluated.reserve(chosen.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto it = chosen.find(i);
    if (it == chosen.end()) continue;
    EvaluatedSample es;
    es.sample = samples[i];
    es.record = *it->second;
    es.correct = es.record.prediction == es.sample.ground_truth;
    es.hallucinated = es.sample.condition == Condition::TextContradictory &&
                      es.sample.hallucination_option &&
                      es.record.prediction == *es.sample.hallucination_option;
    result.evaluated.push_back(std::move(es));
  }
  result.coverage.evaluated = result.evaluated.size();
  result.coverage.missing = samples.size() - result.evaluated.size();
  return result;
}

std::vector<ConditionGroup> group_conditions(
    const std::vector<EvaluatedSample>& evaluated) {
  std::vector<ConditionGroup> groups;
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    const EvaluatedSample& es = evaluated[i];
    const auto [it, inserted] =
        position.emplace(es.sample.group_id, groups.size());
    if (inserted) groups.push_back({es.sample.group_id, {}});
    auto& slot =
        groups[it->second].members[static_cast<std::size_t>(es.sample.condition)];
    if (slot) {
      throw std::invalid_argument(
          "group_conditions: duplicate condition '" +
          std::string(to_string(es.sample.condition)) + "' in group '" +
          es.sample.group_id + "'");
    }
    slot = i;
  }
  return groups;
}

int tier_from_similarity(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("tier_from_similarity: s must be in [0,1]");
  }
  if (s < 0.5) return 1;
  if (s < 0.8) return 2;
  return 3;
}

double BehaviorProfile::p_correct(Condition c) const {
  switch (c) {
    case Condition::TextFree: return p_correct_free;
    case Condition::TextCongruent: return p_correct_congruent;
    case Condition::TextContradictory: return p_correct_contradictory;
  }
  return 0.0;
}

std::vector<EvaluationRecord> synthesize_responses(
    const std::vector<BenchmarkSample>& samples, const BehaviorProfile& profile,
    const std::string& model_id, std::uint64_t seed) {
  check_probability(profile.p_correct_free, "p_correct_free");
  check_probability(profile.p_correct_congruent, "p_correct_congruent");
  check_probability(profile.p_correct_contradictory, "p_correct_contradictory");
  check_probability(profile.p_hallucinate, "p_hallucinate");
  if (profile.p_correct_contradictory + profile.p_hallucinate > 1.0 + 1e-9) {
    throw std::invalid_argument(
        "behavior profile: p_correct_contradictory + p_hallucinate must not "
        "exceed 1");
  }

  num::Rng rng(num::derive_seed(seed, "synthesize_responses"));
  std::vector<EvaluationRecord> records;
  records.reserve(samples.size());
  for (const BenchmarkSample& s : samples) {
    const bool contradictory = s.condition == Condition::TextContradictory;
    const std::size_t truth = option_index(s.ground_truth);
    const std::size_t halluc =
        contradictory && s.hallucination_option
            ? option_index(*s.hallucination_option)
            : kOptionCount;  // sentinel: no hallucination target

    std::array<double, kOptionCount> probs{};
    double assigned = profile.p_correct(s.condition);
    probs[truth] = assigned;
    if (halluc < kOptionCount) {
      probs[halluc] = profile.p_hallucinate;
      assigned += profile.p_hallucinate;
    }
    const double residual = std::max(0.0, 1.0 - assigned);
    const std::size_t residual_options =
        kOptionCount - 1 - (halluc < kOptionCount ? 1 : 0);
    for (std::size_t i = 0; i < kOptionCount; ++i) {
      if (i == truth || i == halluc) continue;
      probs[i] = residual / static_cast<double>(residual_options);
    }

    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t pick = kOptionCount - 1;
    for (std::size_t i = 0; i < kOptionCount; ++i) {
      cumulative += probs[i];
      if (u < cumulative) {
        pick = i;
        break;
      }
    }

    EvaluationRecord r;
    r.sample_id = s.sample_id;
    r.model_id = model_id;
    r.prediction = option_label(pick);
    r.option_probs = probs;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace overlay::data
