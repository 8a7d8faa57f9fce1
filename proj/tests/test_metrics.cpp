#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "overlay/datamodel/evaluate.hpp"
#include "overlay/datamodel/types.hpp"
#include "overlay/metrics/render.hpp"
#include "overlay/metrics/report.hpp"
#include "overlay/numerics/rng.hpp"
#include "support/corpus_gen.hpp"
#include "support/oracle_metrics.hpp"

using namespace overlay;
using data::Condition;
using data::Dimension;
using data::EvaluatedSample;

namespace {

// Compact hand-built corpus rows: outcome 1 = correct, 2 = picked the
// planted option (contradictory only), 0 = wrong on a residual option.
struct Row {
  Row(Condition cond_arg = Condition::TextContradictory, int outcome_arg = 1,
      int scs_arg = 3, Dimension dim_arg = Dimension::Temporal,
      int tier_arg = 1, std::string group_arg = "")
      : cond(cond_arg),
        outcome(outcome_arg),
        scs(scs_arg),
        dim(dim_arg),
        tier(tier_arg),
        group(std::move(group_arg)) {}

  Condition cond;
  int outcome;
  int scs;
  Dimension dim;
  int tier;
  std::string group;
};

EvaluatedSample make_es(const Row& row, std::size_t idx) {
  data::BenchmarkSample s;
  s.sample_id = "s" + std::to_string(idx);
  s.group_id = row.group.empty() ? "g" + std::to_string(idx) : row.group;
  s.dimension = row.dim;
  s.attribute = "event order";
  s.tier = row.tier;
  s.condition = row.cond;
  for (std::size_t i = 0; i < data::kOptionCount; ++i) {
    s.options[i] = "option " + data::option_label(i);
  }
  s.ground_truth = "A";
  if (row.cond == Condition::TextContradictory) {
    s.hallucination_option = "B";
    s.scs = row.scs;
  }
  data::set_allocation(s, {0.25, 0.25, 0.25, 0.25});

  EvaluatedSample es;
  es.sample = s;
  es.record.sample_id = s.sample_id;
  es.record.model_id = "m";
  es.record.prediction = row.outcome == 1 ? "A" : row.outcome == 2 ? "B" : "C";
  es.correct = row.outcome == 1;
  es.hallucinated =
      row.cond == Condition::TextContradictory && row.outcome == 2;
  return es;
}

std::vector<EvaluatedSample> build(const std::vector<Row>& rows) {
  std::vector<EvaluatedSample> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(make_es(rows[i], i));
  return out;
}

void check_value(const metrics::MetricValue& got,
                 const testing::oracle::Maybe& want) {
  REQUIRE(got.defined() == want.defined);
  if (want.defined && !got.infinite) {
    CHECK(std::abs(*got.value - want.value) <= 1e-12);
  }
}

// Random evaluated corpus + groups; some records get their probabilities
// stripped so that the skip path stays exercised.
struct Fixture {
  std::vector<EvaluatedSample> evaluated;
  std::vector<data::ConditionGroup> groups;
};

Fixture random_fixture(num::Rng& rng, std::size_t n_groups,
                       bool complete_groups) {
  const auto samples = testing::random_corpus(rng, n_groups, complete_groups);
  data::BehaviorProfile profile;
  profile.p_correct_free = rng.uniform();
  profile.p_correct_congruent = rng.uniform();
  profile.p_hallucinate = rng.uniform();
  profile.p_correct_contradictory =
      (1.0 - profile.p_hallucinate) * rng.uniform();
  auto records =
      data::synthesize_responses(samples, profile, "m", rng.next_u64());
  for (auto& r : records) {
    if (rng.uniform() < 0.15) r.option_probs.reset();
  }
  Fixture f;
  auto joined = data::join(samples, records, "m");
  f.evaluated = std::move(joined.evaluated);
  f.groups = data::group_conditions(f.evaluated);
  return f;
}

}  // namespace

TEST_CASE("hrr") {
  CHECK(*metrics::hrr(build({{Condition::TextContradictory, 1},
                             {Condition::TextContradictory, 1}}))
             .value == 1.0);
  // C over contradictory = [1,0,1,1] -> 0.75; the free sample is excluded
  const auto input = build({{Condition::TextContradictory, 1},
                            {Condition::TextContradictory, 0},
                            {Condition::TextContradictory, 1},
                            {Condition::TextContradictory, 1},
                            {Condition::TextFree, 0}});
  CHECK(*metrics::hrr(input).value == 0.75);
  const auto none = metrics::hrr(build({{Condition::TextFree, 1}}));
  CHECK_FALSE(none.defined());
  CHECK_FALSE(none.reason.empty());
}

TEST_CASE("har and tihr") {
  const auto input = build({{Condition::TextContradictory, 2},
                            {Condition::TextContradictory, 2},
                            {Condition::TextContradictory, 0},
                            {Condition::TextContradictory, 1}});
  CHECK(*metrics::har(input).value == 0.5);
  CHECK(*metrics::tihr(input).value == 0.5);

  const auto clean = build({{Condition::TextContradictory, 1},
                            {Condition::TextContradictory, 0}});
  CHECK(*metrics::har(clean).value == 0.0);
  CHECK_FALSE(metrics::har(build({{Condition::TextFree, 1}})).defined());

  const auto all = build({{Condition::TextContradictory, 2}});
  CHECK(*metrics::har(all).value == 1.0);
  CHECK(*metrics::tihr(all).value == 1.0);
}

TEST_CASE("tib") {
  // 3 of 4 errors match the planted option
  const auto input = build({{Condition::TextContradictory, 2},
                            {Condition::TextContradictory, 2},
                            {Condition::TextContradictory, 2},
                            {Condition::TextContradictory, 0},
                            {Condition::TextContradictory, 1}});
  CHECK(*metrics::tib(input).value == 0.75);

  CHECK(*metrics::tib(build({{Condition::TextContradictory, 2}})).value == 1.0);
  CHECK_FALSE(metrics::tib(build({{Condition::TextContradictory, 1}})).defined());
}

TEST_CASE("scsi") {
  CHECK(*metrics::scsi(build({{Condition::TextContradictory, 2, 5}})).value ==
        5.0);
  // SCS=[5,3,1], H=[1,1,0] -> 4.0
  const auto input = build({{Condition::TextContradictory, 2, 5},
                            {Condition::TextContradictory, 2, 3},
                            {Condition::TextContradictory, 0, 1}});
  CHECK(*metrics::scsi(input).value == 4.0);
  CHECK_FALSE(
      metrics::scsi(build({{Condition::TextContradictory, 1, 5}})).defined());
}

TEST_CASE("whr") {
  CHECK(*metrics::whr(build({{Condition::TextContradictory, 2, 4},
                             {Condition::TextContradictory, 2, 2}}))
             .value == 1.0);
  // SCS=[5,1], H=[1,0] -> 5/6
  const auto input = build({{Condition::TextContradictory, 2, 5},
                            {Condition::TextContradictory, 1, 1}});
  CHECK(*metrics::whr(input).value == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(*metrics::whr(build({{Condition::TextContradictory, 1, 5}})).value ==
        0.0);
  CHECK_FALSE(metrics::whr(build({{Condition::TextFree, 1}})).defined());
}

TEST_CASE("hsr") {
  SUBCASE("equal strata induction gives zero") {
    const auto input = build({{Condition::TextContradictory, 2, 1},
                              {Condition::TextContradictory, 0, 2},
                              {Condition::TextContradictory, 2, 5},
                              {Condition::TextContradictory, 0, 4}});
    CHECK(*metrics::hsr(input).value == 0.0);
  }
  SUBCASE("0.75 versus 0.5 gives +50 percent") {
    const auto input = build({
        {Condition::TextContradictory, 2, 1},  // weak: 1 of 2 errors induced
        {Condition::TextContradictory, 0, 2},
        {Condition::TextContradictory, 2, 5},  // strong: 3 of 4 induced
        {Condition::TextContradictory, 2, 4},
        {Condition::TextContradictory, 2, 4},
        {Condition::TextContradictory, 0, 5},
    });
    CHECK(*metrics::hsr(input).value == doctest::Approx(50.0).epsilon(1e-12));
  }
  SUBCASE("undefined without weak-conflict errors") {
    const auto input = build({{Condition::TextContradictory, 1, 1},
                              {Condition::TextContradictory, 2, 5}});
    CHECK_FALSE(metrics::hsr(input).defined());
  }
  SUBCASE("undefined when weak-conflict induction is zero") {
    const auto input = build({{Condition::TextContradictory, 0, 1},
                              {Condition::TextContradictory, 2, 5}});
    CHECK_FALSE(metrics::hsr(input).defined());
  }
  SUBCASE("scs 3 belongs to neither stratum") {
    const auto input = build({{Condition::TextContradictory, 2, 3},
                              {Condition::TextContradictory, 0, 3}});
    CHECK_FALSE(metrics::hsr(input).defined());
  }
}

TEST_CASE("hrc") {
  const auto input = build({{Condition::TextContradictory, 2, 1},
                            {Condition::TextContradictory, 0, 1},
                            {Condition::TextContradictory, 2, 2},
                            {Condition::TextContradictory, 2, 5},
                            {Condition::TextContradictory, 2, 5},
                            {Condition::TextContradictory, 1, 5}});
  const auto levels = metrics::hrc(input);
  CHECK(*levels[0].value == 0.5);
  CHECK(*levels[1].value == 1.0);
  CHECK_FALSE(levels[2].defined());  // no level-3 samples
  CHECK_FALSE(levels[3].defined());
  CHECK(*levels[4].value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  SUBCASE("recombination equals har") {
    num::Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
      const auto f = random_fixture(rng, 30, false);
      const auto r = metrics::hrc(f.evaluated);
      const auto h = metrics::har(f.evaluated);
      std::array<double, 5> n{};
      for (const auto& es : f.evaluated) {
        if (es.sample.condition == Condition::TextContradictory && es.sample.scs) {
          n[static_cast<std::size_t>(*es.sample.scs) - 1] += 1.0;
        }
      }
      double weighted = 0.0;
      double total = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        if (!r[k].defined()) continue;
        weighted += *r[k].value * n[k];
        total += n[k];
      }
      if (!h.defined()) continue;
      CHECK(std::abs(weighted / total - *h.value) <= 1e-12);
    }
  }
}

TEST_CASE("paired-group metrics") {
  // 10 paired groups: free correct on 8, contradictory correct on 3
  std::vector<Row> rows;
  for (int g = 0; g < 10; ++g) {
    const std::string group = "g" + std::to_string(g);
    rows.push_back({Condition::TextFree, g < 8 ? 1 : 0, 3,
                    Dimension::Temporal, 1, group});
    rows.push_back({Condition::TextContradictory, g < 3 ? 1 : 2, 3,
                    Dimension::Temporal, 1, group});
  }
  const auto input = build(rows);
  const auto groups = data::group_conditions(input);

  CHECK(std::abs(*metrics::vyr(input, groups).value - 0.5) <= 1e-12);
  // icr: 1 - 0.3/0.8 = 0.625
  CHECK(std::abs(*metrics::icr(input, groups).value - 0.625) <= 1e-12);

  SUBCASE("identical correctness in both conditions") {
    std::vector<Row> same;
    for (int g = 0; g < 6; ++g) {
      const std::string group = "p" + std::to_string(g);
      same.push_back({Condition::TextFree, g % 2, 3, Dimension::Action, 1, group});
      same.push_back({Condition::TextContradictory, g % 2, 3, Dimension::Action,
                      1, group});
    }
    const auto in2 = build(same);
    const auto g2 = data::group_conditions(in2);
    CHECK(*metrics::vyr(in2, g2).value == 0.0);
    CHECK(*metrics::icr(in2, g2).value == 0.0);
  }
  SUBCASE("undefined without paired groups") {
    const auto lonely = build({{Condition::TextFree, 1, 3, Dimension::Action, 1, "x"}});
    const auto lg = data::group_conditions(lonely);
    CHECK_FALSE(metrics::vyr(lonely, lg).defined());
    CHECK_FALSE(metrics::icr(lonely, lg).defined());
  }
  SUBCASE("icr undefined at zero clean accuracy") {
    const auto bad = build({{Condition::TextFree, 0, 3, Dimension::Action, 1, "x"},
                            {Condition::TextContradictory, 0, 3,
                             Dimension::Action, 1, "x"}});
    const auto bg = data::group_conditions(bad);
    CHECK_FALSE(metrics::icr(bad, bg).defined());
    CHECK(metrics::vyr(bad, bg).defined());  // vyr stays defined
  }
}

TEST_CASE("sgli") {
  // 10 complete groups: congruent 9 correct, free 8, contradictory 5
  std::vector<Row> rows;
  for (int g = 0; g < 10; ++g) {
    const std::string group = "g" + std::to_string(g);
    rows.push_back({Condition::TextFree, g < 8 ? 1 : 0, 3, Dimension::Object, 2,
                    group});
    rows.push_back({Condition::TextCongruent, g < 9 ? 1 : 0, 3,
                    Dimension::Object, 2, group});
    rows.push_back({Condition::TextContradictory, g < 5 ? 1 : 0, 3,
                    Dimension::Object, 2, group});
  }
  const auto input = build(rows);
  const auto groups = data::group_conditions(input);
  CHECK(std::abs(*metrics::sgli(input, groups).value - 0.5) <= 1e-12);

  SUBCASE("zero when congruent equals contradictory") {
    std::vector<Row> same;
    for (int g = 0; g < 4; ++g) {
      const std::string group = "q" + std::to_string(g);
      same.push_back({Condition::TextFree, 1, 3, Dimension::Object, 2, group});
      same.push_back({Condition::TextCongruent, g % 2, 3, Dimension::Object, 2, group});
      same.push_back({Condition::TextContradictory, g % 2, 3, Dimension::Object,
                      2, group});
    }
    const auto in2 = build(same);
    CHECK(*metrics::sgli(in2, data::group_conditions(in2)).value == 0.0);
  }
  SUBCASE("undefined without complete groups") {
    const auto partial = build({{Condition::TextFree, 1, 3, Dimension::Object, 2, "x"},
                                {Condition::TextContradictory, 1, 3,
                                 Dimension::Object, 2, "x"}});
    CHECK_FALSE(
        metrics::sgli(partial, data::group_conditions(partial)).defined());
  }
}

TEST_CASE("load sensitivity") {
  SUBCASE("hand pearson: L=[1,2,3], C=[0,1,1]") {
    const auto input = build({{Condition::TextContradictory, 0, 3, Dimension::Spatial, 1},
                              {Condition::TextContradictory, 1, 3, Dimension::Spatial, 2},
                              {Condition::TextContradictory, 1, 3, Dimension::Spatial, 3}});
    const auto l = metrics::load_sensitive(input, Dimension::Spatial);
    CHECK(l.n == 3);
    CHECK(std::abs(*l.r.value - 0.8660254037844386) <= 1e-12);
    CHECK(std::abs(*l.t.value - 1.7320508075688772) <= 1e-12);
    CHECK_FALSE(l.t.infinite);
  }
  SUBCASE("constant correctness is undefined") {
    const auto input = build({{Condition::TextContradictory, 1, 3, Dimension::Action, 1},
                              {Condition::TextContradictory, 1, 3, Dimension::Action, 2},
                              {Condition::TextContradictory, 1, 3, Dimension::Action, 3}});
    const auto l = metrics::load_sensitive(input, Dimension::Action);
    CHECK(l.n == 3);
    CHECK_FALSE(l.r.defined());
    CHECK_FALSE(l.t.defined());
  }
  SUBCASE("perfect monotone correctness flags an infinite t") {
    const auto input = build({{Condition::TextContradictory, 0, 3, Dimension::Temporal, 1},
                              {Condition::TextContradictory, 0, 3, Dimension::Temporal, 1},
                              {Condition::TextContradictory, 1, 3, Dimension::Temporal, 2},
                              {Condition::TextContradictory, 1, 3, Dimension::Temporal, 2}});
    const auto l = metrics::load_sensitive(input, Dimension::Temporal);
    CHECK(*l.r.value == 1.0);
    CHECK(l.t.infinite);
    CHECK(*l.t.value > 0);
  }
  SUBCASE("fewer than three samples is undefined") {
    const auto input = build({{Condition::TextContradictory, 0, 3, Dimension::Object, 1},
                              {Condition::TextContradictory, 1, 3, Dimension::Object, 3}});
    const auto l = metrics::load_sensitive(input, Dimension::Object);
    CHECK(l.n == 2);
    CHECK_FALSE(l.r.defined());
  }
}

TEST_CASE("probability shift") {
  auto with_probs = [](EvaluatedSample es,
                       std::array<double, 4> probs) {
    es.record.option_probs = probs;
    return es;
  };

  SUBCASE("identical vectors shift by zero; regimes follow the flags") {
    // free correct, contra hallucinated -> regime I
    auto free_es = with_probs(make_es({Condition::TextFree, 1, 3,
                                       Dimension::Temporal, 1, "g"}, 0),
                              {0.7, 0.1, 0.1, 0.1});
    auto contra_es = with_probs(make_es({Condition::TextContradictory, 2, 3,
                                         Dimension::Temporal, 1, "g"}, 1),
                                {0.7, 0.1, 0.1, 0.1});
    std::vector<EvaluatedSample> input{free_es, contra_es};
    const auto groups = data::group_conditions(input);
    const auto entries = metrics::prob_shift(input, groups);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].delta_truth == 0.0);
    CHECK(entries[0].delta_halluc == 0.0);
    CHECK(entries[0].regime == metrics::Regime::ActiveMisleading);
  }
  SUBCASE("wrong-before-text is compounded failure regardless of outcome") {
    auto free_es = with_probs(make_es({Condition::TextFree, 0, 3,
                                       Dimension::Temporal, 1, "g"}, 0),
                              {0.2, 0.3, 0.4, 0.1});
    auto contra_es = with_probs(make_es({Condition::TextContradictory, 1, 3,
                                         Dimension::Temporal, 1, "g"}, 1),
                                {0.6, 0.2, 0.1, 0.1});
    std::vector<EvaluatedSample> input{free_es, contra_es};
    const auto entries =
        metrics::prob_shift(input, data::group_conditions(input));
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].regime == metrics::Regime::CompoundedFailure);
    CHECK(std::abs(entries[0].delta_truth - 0.4) <= 1e-12);
    CHECK(std::abs(entries[0].delta_halluc - (-0.1)) <= 1e-12);
  }
  SUBCASE("correct under both conditions is facilitated correctness") {
    auto free_es = with_probs(make_es({Condition::TextFree, 1, 3,
                                       Dimension::Temporal, 1, "g"}, 0),
                              {0.9, 0.1, 0.0, 0.0});
    auto contra_es = with_probs(make_es({Condition::TextContradictory, 1, 3,
                                         Dimension::Temporal, 1, "g"}, 1),
                                {0.8, 0.2, 0.0, 0.0});
    std::vector<EvaluatedSample> input{free_es, contra_es};
    const auto entries =
        metrics::prob_shift(input, data::group_conditions(input));
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].regime == metrics::Regime::FacilitatedCorrectness);
  }
  SUBCASE("wrong but off the planted option is labeled other") {
    auto free_es = with_probs(make_es({Condition::TextFree, 1, 3,
                                       Dimension::Temporal, 1, "g"}, 0),
                              {0.9, 0.1, 0.0, 0.0});
    auto contra_es = with_probs(make_es({Condition::TextContradictory, 0, 3,
                                         Dimension::Temporal, 1, "g"}, 1),
                                {0.2, 0.1, 0.7, 0.0});
    std::vector<EvaluatedSample> input{free_es, contra_es};
    const auto entries =
        metrics::prob_shift(input, data::group_conditions(input));
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].regime == metrics::Regime::Other);
  }
  SUBCASE("groups without probabilities are skipped and counted") {
    auto free_es = make_es({Condition::TextFree, 1, 3, Dimension::Temporal, 1, "g"}, 0);
    auto contra_es = make_es({Condition::TextContradictory, 0, 3,
                              Dimension::Temporal, 1, "g"}, 1);
    std::vector<EvaluatedSample> input{free_es, contra_es};
    std::size_t skipped = 0;
    const auto entries =
        metrics::prob_shift(input, data::group_conditions(input), &skipped);
    CHECK(entries.empty());
    CHECK(skipped == 1);
  }
  SUBCASE("labels depend only on the indicators, not the probabilities") {
    num::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      auto f = random_fixture(rng, 12, true);
      const auto before = metrics::prob_shift(f.evaluated, f.groups);
      // replace every probability vector with a shared fixed one
      for (auto& es : f.evaluated) {
        if (es.record.option_probs) {
          es.record.option_probs = {{0.4, 0.3, 0.2, 0.1}};
        }
      }
      const auto after = metrics::prob_shift(f.evaluated, f.groups);
      REQUIRE(before.size() == after.size());
      for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].regime == after[i].regime);
      }
    }
  }
}

TEST_CASE("overall accuracy") {
  CHECK(*metrics::overall_accuracy(build({{Condition::TextFree, 1},
                                          {Condition::TextCongruent, 1}}))
             .value == 1.0);
  CHECK(*metrics::overall_accuracy(build({{Condition::TextFree, 1},
                                          {Condition::TextContradictory, 1},
                                          {Condition::TextFree, 0},
                                          {Condition::TextContradictory, 2}}))
             .value == 0.5);
  CHECK_FALSE(metrics::overall_accuracy({}).defined());
}

TEST_CASE("full report composes the deterministic profiles") {
  num::Rng rng(13);
  const auto samples = testing::random_corpus(rng, 80, true);

  SUBCASE("always-correct responder") {
    const auto records =
        data::synthesize_responses(samples, data::BehaviorProfile{}, "m", 5);
    const auto joined = data::join(samples, records, "m");
    const auto groups = data::group_conditions(joined.evaluated);
    const auto r = metrics::full_report(joined.evaluated, groups);
    CHECK(*r.hrr.value == 1.0);
    CHECK(*r.har.value == 0.0);
    CHECK(*r.vyr.value == 0.0);
    CHECK_FALSE(r.tib.defined());
    CHECK(*r.overall.value == 1.0);
  }
  SUBCASE("fully misled responder") {
    data::BehaviorProfile profile;
    profile.p_correct_contradictory = 0.0;
    profile.p_hallucinate = 1.0;
    const auto records = data::synthesize_responses(samples, profile, "m", 6);
    const auto joined = data::join(samples, records, "m");
    const auto groups = data::group_conditions(joined.evaluated);
    const auto r = metrics::full_report(joined.evaluated, groups);
    CHECK(*r.har.value == 1.0);
    CHECK(*r.tib.value == 1.0);
    CHECK(*r.vyr.value == 1.0);
    CHECK(*r.icr.value == 1.0);
    CHECK(*r.whr.value == 1.0);
    CHECK(*r.sgli.value == 1.0);
  }
}

TEST_CASE("full report never fails on partial data") {
  const auto r = metrics::full_report({}, {});
  CHECK_FALSE(r.overall.defined());
  CHECK_FALSE(r.hrr.defined());
  CHECK_FALSE(r.vyr.defined());
  CHECK_FALSE(r.hsr.defined());
  CHECK_FALSE(r.prob_shift.mean_delta_truth.defined());
  CHECK(r.counts.samples == 0);
  for (const auto& level : r.hrc) CHECK_FALSE(level.defined());
  for (const auto& l : r.load) CHECK_FALSE(l.r.defined());
}

TEST_CASE("metric invariants on random corpora") {
  num::Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = random_fixture(rng, 25, false);
    const auto r = metrics::full_report(f.evaluated, f.groups);

    // har == tihr is asserted inside full_report; recheck the values here
    REQUIRE(r.har.defined() == r.tihr.defined());
    if (r.har.defined()) CHECK(*r.har.value == *r.tihr.value);

    if (r.tib.defined() && r.har.defined()) {
      CHECK(*r.tib.value >= *r.har.value);
    }
    for (const auto& v :
         {r.hrr, r.har, r.tihr, r.tib, r.whr, r.overall}) {
      if (v.defined()) {
        CHECK(*v.value >= 0.0);
        CHECK(*v.value <= 1.0);
      }
    }
    for (const auto& level : r.hrc) {
      if (level.defined()) {
        CHECK(*level.value >= 0.0);
        CHECK(*level.value <= 1.0);
      }
    }
    for (const auto& l : r.load) {
      if (l.r.defined()) {
        CHECK(*l.r.value >= -1.0);
        CHECK(*l.r.value <= 1.0);
      }
    }
    if (r.scsi.defined()) {
      int lo = 6;
      int hi = 0;
      for (const auto& es : f.evaluated) {
        if (es.hallucinated && es.sample.scs) {
          lo = std::min(lo, *es.sample.scs);
          hi = std::max(hi, *es.sample.scs);
        }
      }
      CHECK(*r.scsi.value >= lo);
      CHECK(*r.scsi.value <= hi);
    }
  }
}

TEST_CASE("whr equals har under constant conflict scores") {
  num::Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    auto samples = testing::random_corpus(rng, 20, false);
    for (auto& s : samples) {
      if (s.scs) s.scs = 3;
    }
    data::BehaviorProfile profile;
    profile.p_correct_contradictory = 0.4;
    profile.p_hallucinate = 0.4;
    const auto records =
        data::synthesize_responses(samples, profile, "m", rng.next_u64());
    const auto joined = data::join(samples, records, "m");
    const auto w = metrics::whr(joined.evaluated);
    const auto h = metrics::har(joined.evaluated);
    REQUIRE(w.defined() == h.defined());
    if (w.defined()) CHECK(std::abs(*w.value - *h.value) <= 1e-12);
  }
}

TEST_CASE("every metric matches the naive recount oracle") {
  namespace oracle = testing::oracle;
  num::Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = random_fixture(rng, trial % 50 == 0 ? 120 : 15, false);
    const auto r = metrics::full_report(f.evaluated, f.groups);

    check_value(r.overall, oracle::o_overall(f.evaluated));
    check_value(r.hrr, oracle::o_hrr(f.evaluated));
    check_value(r.har, oracle::o_har(f.evaluated));
    check_value(r.tihr, oracle::o_tihr(f.evaluated));
    check_value(r.tib, oracle::o_tib(f.evaluated));
    check_value(r.scsi, oracle::o_scsi(f.evaluated));
    check_value(r.whr, oracle::o_whr(f.evaluated));
    check_value(r.hsr, oracle::o_hsr(f.evaluated));
    check_value(r.vyr, oracle::o_vyr(f.evaluated));
    check_value(r.icr, oracle::o_icr(f.evaluated));
    check_value(r.sgli, oracle::o_sgli(f.evaluated));

    const auto hrc_oracle = oracle::o_hrc(f.evaluated);
    for (std::size_t k = 0; k < 5; ++k) check_value(r.hrc[k], hrc_oracle[k]);

    for (std::size_t d = 0; d < data::kDimensionCount; ++d) {
      const auto dim = static_cast<Dimension>(d);
      const auto lo = oracle::o_load(f.evaluated, dim);
      REQUIRE(r.load[d].n == lo.n);
      check_value(r.load[d].r, lo.r);
      CHECK(r.load[d].t.infinite == lo.t_infinite);
      if (!lo.t_infinite) check_value(r.load[d].t, lo.t);
      check_value(r.accuracy_by_dimension[d],
                  oracle::o_accuracy_dim(f.evaluated, dim));
    }
    for (int k = 1; k <= 5; ++k) {
      check_value(r.accuracy_by_scs[static_cast<std::size_t>(k) - 1],
                  oracle::o_accuracy_scs(f.evaluated, k));
    }

    const auto shift = oracle::o_prob_shift(f.evaluated);
    CHECK(r.prob_shift.used_groups == shift.used);
    CHECK(r.prob_shift.skipped_groups == shift.skipped);
    for (std::size_t i = 0; i < metrics::kRegimeCount; ++i) {
      CHECK(r.prob_shift.regime_counts[i] == shift.regimes[i]);
    }
    check_value(r.prob_shift.mean_delta_truth, shift.mean_dy);
    check_value(r.prob_shift.mean_delta_halluc, shift.mean_do);
  }
}

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("table rendering") {
  metrics::MetricReport r;
  r.vyr = metrics::defined_value(0.5);
  r.tihr = metrics::defined_value(0.879);
  r.whr = metrics::defined_value(0.888);
  r.scsi = metrics::defined_value(4.0);
  r.hrr = metrics::defined_value(0.121);
  r.hsr = metrics::defined_value(50.0);
  r.tib = metrics::undefined_value("no incorrect contradictory samples");
  r.icr = metrics::defined_value(0.807);
  r.sgli = metrics::defined_value(1.323);
  r.load[0].r = metrics::defined_value(0.8660254037844386);
  r.load[1].r = metrics::undefined_value("fewer than 3 contradictory samples");
  r.load[2].r = metrics::defined_value(-0.25);
  r.load[3].r = metrics::defined_value(1.0);
  r.overall = metrics::defined_value(0.242);

  const std::string table = metrics::to_table(r);
  const auto lines = [&] {
    std::vector<std::string> out;
    std::istringstream in(table);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
  }();
  REQUIRE(lines.size() == 2);

  const auto header = tokens(lines[0]);
  const std::vector<std::string> expected_header = {
      "VYR", "TIHR", "WHR", "SCSI", "HRR", "HSR", "TIB",
      "ICR", "SGLI", "TLSR", "ASLSR", "AALSR", "SRLSR", "Overall"};
  CHECK(header == expected_header);

  const auto row = tokens(lines[1]);
  const std::vector<std::string> expected_row = {
      "50.0", "87.9", "88.8", "4.000", "12.1", "50.0", "—",
      "80.7", "1.323", "0.866", "—", "-0.250", "1.000", "24.2"};
  CHECK(row == expected_row);
}

TEST_CASE("json rendering") {
  const auto input = build({{Condition::TextContradictory, 2, 5},
                            {Condition::TextContradictory, 1, 3}});
  const auto groups = data::group_conditions(input);
  const auto r = metrics::full_report(input, groups);
  const auto j = nlohmann::json::parse(metrics::to_json(r));

  CHECK(j["schema_version"] == "1");
  CHECK(j["counts"]["samples"] == 2);
  CHECK(j["counts"]["contradictory"] == 2);
  CHECK(j["layer1"]["har"]["value"] == 0.5);
  CHECK(j["layer1"]["hrr"]["value"] == 0.5);
  CHECK(j["layer2"]["scsi"]["value"] == 5.0);
  // undefined fields carry a null value and a reason
  CHECK(j["layer1"]["vyr"]["value"].is_null());
  CHECK_FALSE(j["layer1"]["vyr"]["reason"].get<std::string>().empty());
  CHECK(j["layer3"]["temporal"]["r"]["value"].is_null());

  SUBCASE("full precision round trip") {
    metrics::MetricReport fine;
    fine.scsi = metrics::defined_value(1.0 / 3.0);
    const auto parsed = nlohmann::json::parse(metrics::to_json(fine));
    CHECK(parsed["layer2"]["scsi"]["value"].get<double>() == 1.0 / 3.0);
  }
  SUBCASE("infinite t statistics are marked") {
    metrics::MetricReport fine;
    fine.load[2].r = metrics::defined_value(1.0);
    fine.load[2].t = metrics::defined_value(HUGE_VAL);
    const auto parsed = nlohmann::json::parse(metrics::to_json(fine));
    CHECK(parsed["layer3"]["object"]["t"]["value"] == "inf");
    CHECK(parsed["layer3"]["object"]["t"]["infinite"] == true);
  }
}
