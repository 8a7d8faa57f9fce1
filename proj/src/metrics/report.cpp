#include "overlay/metrics/report.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "overlay/numerics/ops.hpp"

namespace overlay::metrics {

namespace {

using data::Condition;
using data::ConditionGroup;
using data::Dimension;
using data::EvaluatedSample;

bool is_contradictory(const EvaluatedSample& es) {
  return es.sample.condition == Condition::TextContradictory;
}

MetricValue ratio(double numerator, double denominator, std::string reason) {
  if (denominator <= 0.0) return undefined_value(std::move(reason));
  return defined_value(numerator / denominator);
}

// Mean correctness of the group members under `cond`, restricted to groups
// where `required` returns true. Undefined when no group qualifies.
template <typename Pred>
MetricValue paired_accuracy(const Evaluated& input, const Groups& groups,
                            Condition cond, Pred required,
                            std::string reason) {
  double correct = 0.0;
  double n = 0.0;
  for (const ConditionGroup& g : groups) {
    if (!required(g)) continue;
    const auto& member = g.at(cond);
    n += 1.0;
    correct += input[*member].correct ? 1.0 : 0.0;
  }
  return ratio(correct, n, std::move(reason));
}

bool has_free_and_contra(const ConditionGroup& g) {
  return g.at(Condition::TextFree).has_value() &&
         g.at(Condition::TextContradictory).has_value();
}

// tib over the contradictory samples selected by `keep`.
template <typename Pred>
MetricValue tib_over(const Evaluated& input, Pred keep) {
  double wrong = 0.0;
  double induced = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es) || !keep(es) || es.correct) continue;
    wrong += 1.0;
    induced += es.hallucinated ? 1.0 : 0.0;
  }
  return ratio(induced, wrong, "no incorrect contradictory samples");
}

MetricValue accuracy_over(const Evaluated& input,
                          bool (*keep)(const EvaluatedSample&, int), int arg,
                          std::string reason) {
  double correct = 0.0;
  double n = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!keep(es, arg)) continue;
    n += 1.0;
    correct += es.correct ? 1.0 : 0.0;
  }
  return ratio(correct, n, std::move(reason));
}

}  // namespace

MetricValue defined_value(double v) { return {v, "", !std::isfinite(v)}; }

MetricValue undefined_value(std::string reason) {
  return {std::nullopt, std::move(reason), false};
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::ActiveMisleading: return "active_misleading";
    case Regime::CompoundedFailure: return "compounded_failure";
    case Regime::FacilitatedCorrectness: return "facilitated_correctness";
    case Regime::Other: return "other";
  }
  return "?";
}

MetricValue overall_accuracy(const Evaluated& input) {
  double correct = 0.0;
  for (const EvaluatedSample& es : input) correct += es.correct ? 1.0 : 0.0;
  return ratio(correct, static_cast<double>(input.size()),
               "no evaluated samples");
}

MetricValue hrr(const Evaluated& input) {
  double correct = 0.0;
  double n = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es)) continue;
    n += 1.0;
    correct += es.correct ? 1.0 : 0.0;
  }
  return ratio(correct, n, "no contradictory samples");
}

MetricValue har(const Evaluated& input) {
  double hallucinated = 0.0;
  double n = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es)) continue;
    n += 1.0;
    hallucinated += es.hallucinated ? 1.0 : 0.0;
  }
  return ratio(hallucinated, n, "no contradictory samples");
}

MetricValue tihr(const Evaluated& input) {
  // Recounted from raw predictions rather than the derived flag.
  double matches = 0.0;
  double n = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es)) continue;
    n += 1.0;
    if (es.sample.hallucination_option &&
        es.record.prediction == *es.sample.hallucination_option) {
      matches += 1.0;
    }
  }
  return ratio(matches, n, "no contradictory samples");
}

MetricValue tib(const Evaluated& input) {
  return tib_over(input, [](const EvaluatedSample&) { return true; });
}

MetricValue scsi(const Evaluated& input) {
  double weighted = 0.0;
  double hallucinated = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es) || !es.hallucinated) continue;
    weighted += static_cast<double>(es.sample.scs.value_or(0));
    hallucinated += 1.0;
  }
  return ratio(weighted, hallucinated, "no hallucinations");
}

MetricValue whr(const Evaluated& input) {
  double weighted = 0.0;
  double total = 0.0;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es)) continue;
    const double scs = static_cast<double>(es.sample.scs.value_or(0));
    total += scs;
    if (es.hallucinated) weighted += scs;
  }
  return ratio(weighted, total, "no conflict mass among contradictory samples");
}

MetricValue hsr(const Evaluated& input) {
  const MetricValue weak = tib_over(input, [](const EvaluatedSample& es) {
    const int scs = es.sample.scs.value_or(0);
    return scs == 1 || scs == 2;
  });
  const MetricValue strong = tib_over(input, [](const EvaluatedSample& es) {
    const int scs = es.sample.scs.value_or(0);
    return scs == 4 || scs == 5;
  });
  if (!weak.defined()) {
    return undefined_value("weak-conflict induction bias is undefined");
  }
  if (*weak.value == 0.0) {
    return undefined_value("weak-conflict induction bias is zero");
  }
  if (!strong.defined()) {
    return undefined_value("strong-conflict induction bias is undefined");
  }
  return defined_value((*strong.value - *weak.value) / *weak.value * 100.0);
}

std::array<MetricValue, 5> hrc(const Evaluated& input) {
  std::array<double, 5> hallucinated{};
  std::array<double, 5> n{};
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es) || !es.sample.scs) continue;
    const std::size_t k = static_cast<std::size_t>(*es.sample.scs) - 1;
    n[k] += 1.0;
    hallucinated[k] += es.hallucinated ? 1.0 : 0.0;
  }
  std::array<MetricValue, 5> out;
  for (std::size_t k = 0; k < 5; ++k) {
    out[k] = ratio(hallucinated[k], n[k], "no samples at this conflict level");
  }
  return out;
}

MetricValue vyr(const Evaluated& input, const Groups& groups) {
  const MetricValue clean =
      paired_accuracy(input, groups, Condition::TextFree, has_free_and_contra,
                      "no groups pair text_free with text_contradictory");
  const MetricValue interfered = paired_accuracy(
      input, groups, Condition::TextContradictory, has_free_and_contra,
      "no groups pair text_free with text_contradictory");
  if (!clean.defined()) return clean;
  return defined_value(*clean.value - *interfered.value);
}

MetricValue icr(const Evaluated& input, const Groups& groups) {
  const MetricValue clean =
      paired_accuracy(input, groups, Condition::TextFree, has_free_and_contra,
                      "no groups pair text_free with text_contradictory");
  if (!clean.defined()) return clean;
  if (*clean.value == 0.0) return undefined_value("clean accuracy is zero");
  const MetricValue interfered = paired_accuracy(
      input, groups, Condition::TextContradictory, has_free_and_contra,
      "no groups pair text_free with text_contradictory");
  return defined_value(1.0 - *interfered.value / *clean.value);
}

MetricValue sgli(const Evaluated& input, const Groups& groups) {
  const auto complete = [](const ConditionGroup& g) { return g.complete(); };
  const MetricValue clean =
      paired_accuracy(input, groups, Condition::TextFree, complete,
                      "no groups carry all three conditions");
  if (!clean.defined()) return clean;
  if (*clean.value == 0.0) return undefined_value("text-free accuracy is zero");
  const MetricValue congruent =
      paired_accuracy(input, groups, Condition::TextCongruent, complete, "");
  const MetricValue contradictory =
      paired_accuracy(input, groups, Condition::TextContradictory, complete, "");
  return defined_value((*congruent.value - *contradictory.value) /
                       *clean.value);
}

LoadSensitivity load_sensitive(const Evaluated& input, Dimension dim) {
  std::vector<double> tier;
  std::vector<double> correct;
  for (const EvaluatedSample& es : input) {
    if (!is_contradictory(es) || es.sample.dimension != dim) continue;
    tier.push_back(static_cast<double>(es.sample.tier));
    correct.push_back(es.correct ? 1.0 : 0.0);
  }
  LoadSensitivity out;
  out.n = tier.size();
  if (out.n < 3) {
    out.r = undefined_value("fewer than 3 contradictory samples");
    out.t = out.r;
    return out;
  }
  const auto r = num::pearson(tier, correct);
  if (!r) {
    out.r = undefined_value("zero variance in tier or correctness");
    out.t = out.r;
    return out;
  }
  out.r = defined_value(*r);
  out.t = defined_value(num::t_statistic(*r, out.n));
  return out;
}

std::vector<ProbShiftEntry> prob_shift(const Evaluated& input,
                                       const Groups& groups,
                                       std::size_t* skipped) {
  std::vector<ProbShiftEntry> out;
  std::size_t skip_count = 0;
  for (const ConditionGroup& g : groups) {
    const auto free_idx = g.at(Condition::TextFree);
    const auto contra_idx = g.at(Condition::TextContradictory);
    if (!free_idx || !contra_idx) {
      ++skip_count;
      continue;
    }
    const EvaluatedSample& free_s = input[*free_idx];
    const EvaluatedSample& contra_s = input[*contra_idx];
    if (!free_s.record.option_probs || !contra_s.record.option_probs ||
        !contra_s.sample.hallucination_option) {
      ++skip_count;
      continue;
    }
    // y and o come from the contradictory member; the paired conditions ask
    // the same question, so the labels are shared.
    const std::size_t y = data::option_index(contra_s.sample.ground_truth);
    const std::size_t o =
        data::option_index(*contra_s.sample.hallucination_option);
    const auto& p_free = *free_s.record.option_probs;
    const auto& p_contra = *contra_s.record.option_probs;

    ProbShiftEntry e;
    e.group_id = g.group_id;
    e.delta_truth = p_contra[y] - p_free[y];
    e.delta_halluc = p_contra[o] - p_free[o];
    if (!free_s.correct) {
      e.regime = Regime::CompoundedFailure;
    } else if (contra_s.correct) {
      e.regime = Regime::FacilitatedCorrectness;
    } else if (contra_s.hallucinated) {
      e.regime = Regime::ActiveMisleading;
    } else {
      e.regime = Regime::Other;
    }
    out.push_back(std::move(e));
  }
  if (skipped != nullptr) *skipped = skip_count;
  return out;
}

MetricReport full_report(const Evaluated& input, const Groups& groups) {
  MetricReport r;
  r.counts.samples = input.size();
  for (const EvaluatedSample& es : input) {
    if (is_contradictory(es)) ++r.counts.contradictory;
  }
  r.counts.groups = groups.size();
  for (const ConditionGroup& g : groups) {
    if (has_free_and_contra(g)) ++r.counts.paired_groups;
    if (g.complete()) ++r.counts.complete_groups;
  }

  r.overall = overall_accuracy(input);
  r.hrr = hrr(input);
  r.vyr = vyr(input, groups);
  r.har = har(input);
  r.icr = icr(input, groups);
  r.sgli = sgli(input, groups);
  r.tihr = tihr(input);
  r.tib = tib(input);
  r.scsi = scsi(input);
  r.whr = whr(input);
  r.hsr = hsr(input);
  r.hrc = hrc(input);
  for (std::size_t d = 0; d < data::kDimensionCount; ++d) {
    r.load[d] = load_sensitive(input, static_cast<Dimension>(d));
  }

  // Two independent countings of the same quantity must agree exactly.
  if (r.har.defined() != r.tihr.defined() ||
      (r.har.defined() && *r.har.value != *r.tihr.value)) {
    throw std::logic_error("full_report: tihr diverged from har");
  }

  for (std::size_t d = 0; d < data::kDimensionCount; ++d) {
    r.accuracy_by_dimension[d] = accuracy_over(
        input,
        [](const EvaluatedSample& es, int dim) {
          return es.sample.dimension == static_cast<Dimension>(dim);
        },
        static_cast<int>(d), "no samples of this dimension");
  }
  for (int k = 1; k <= 5; ++k) {
    r.accuracy_by_scs[static_cast<std::size_t>(k) - 1] = accuracy_over(
        input,
        [](const EvaluatedSample& es, int level) {
          return is_contradictory(es) && es.sample.scs.value_or(0) == level;
        },
        k, "no samples at this conflict level");
  }

  std::size_t skipped = 0;
  const auto entries = prob_shift(input, groups, &skipped);
  r.prob_shift.skipped_groups = skipped;
  r.prob_shift.used_groups = entries.size();
  double sum_truth = 0.0;
  double sum_halluc = 0.0;
  for (const ProbShiftEntry& e : entries) {
    ++r.prob_shift.regime_counts[static_cast<std::size_t>(e.regime)];
    sum_truth += e.delta_truth;
    sum_halluc += e.delta_halluc;
  }
  if (entries.empty()) {
    r.prob_shift.mean_delta_truth =
        undefined_value("no paired groups with option probabilities");
    r.prob_shift.mean_delta_halluc = r.prob_shift.mean_delta_truth;
  } else {
    const double n = static_cast<double>(entries.size());
    r.prob_shift.mean_delta_truth = defined_value(sum_truth / n);
    r.prob_shift.mean_delta_halluc = defined_value(sum_halluc / n);
  }
  return r;
}

}  // namespace overlay::metrics
