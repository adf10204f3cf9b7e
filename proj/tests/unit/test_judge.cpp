#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pvni/errors.hpp"
#include "pvni/judge_anchoring.hpp"
#include "support.hpp"

using namespace pvni;

namespace {

JudgeRecord direct(Trait t, Condition c, const std::string& pid, long long roll, double s,
                   long long variant = 0) {
  JudgeRecord r;
  r.trait = t;
  r.condition = c;
  r.prompt_id = pid;
  r.rollout_id = roll;
  r.variant_id = variant;
  r.payload = DirectScore{s};
  return r;
}

}  // namespace

TEST(ScoreFromLogits, PointMass) {
  std::vector<double> lp(101, -1000.0);
  lp[73] = 0.0;
  EXPECT_NEAR(score_from_logits(lp), 73.0, 1e-9);
}

TEST(ScoreFromLogits, SymmetricCasesAreExact) {
  EXPECT_EQ(score_from_logits(std::vector<double>(101, -4.615)), 50.0);
  std::vector<double> ends(101, -std::numeric_limits<double>::max());
  ends[0] = ends[100] = -0.7;
  EXPECT_EQ(score_from_logits(ends), 50.0);
}

TEST(ScoreFromLogits, Errors) {
  EXPECT_THROW(score_from_logits(std::vector<double>(100, 0.0)), DimensionMismatch);
  std::vector<double> lp(101, 0.0);
  lp[4] = std::nan("");
  EXPECT_THROW(score_from_logits(lp), NonFiniteLogprob);
  lp[4] = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(score_from_logits(lp), NonFiniteLogprob);
}

TEST(ScoreFromLogits, MatchesOracleOnFixture) {
  const auto cases = pvni::testing::read_json(pvni::testing::fixtures() / "logprob_cases.json")["cases"];
  const auto expected =
      pvni::testing::read_json(pvni::testing::fixtures() / "expected" / "logprobs.json")["expected"];
  ASSERT_EQ(cases.size(), 100u);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto lp = cases[i].get<std::vector<double>>();
    EXPECT_NEAR(score_from_logits(lp), expected[i].get<double>(), 1e-12) << i;
  }
}

TEST(Property, SoftmaxShiftInvariance) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> lp(101);
    for (auto& x : lp) x = n(rng);
    const double base = score_from_logits(lp);
    for (double shift : {-50.0, -1.5, 2.25, 40.0}) {
      std::vector<double> moved(lp);
      for (auto& x : moved) x += shift;
      EXPECT_NEAR(score_from_logits(moved), base, 1e-12);
    }
  }
}

TEST(Property, RaisingTokenMovesTowardIt) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_int_distribution<int> tok(0, 100);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> lp(101);
    for (auto& x : lp) x = n(rng);
    const int k = tok(rng);
    const double before = score_from_logits(lp);
    lp[k] += 0.5;
    const double after = score_from_logits(lp);
    EXPECT_LE(std::abs(after - k), std::abs(before - k) + 1e-12);
  }
}

TEST(RolloutAverage, Examples) {
  EXPECT_EQ(rollout_average(std::vector<double>{70}), 70.0);
  EXPECT_EQ(rollout_average(std::vector<double>{60, 80}), 70.0);
  EXPECT_THROW(rollout_average(std::vector<double>{}), EmptyRollouts);
  const auto j = pvni::testing::read_json(pvni::testing::fixtures() / "expected" / "logprobs.json");
  EXPECT_NEAR(rollout_average(j["rollouts16"].get<std::vector<double>>()),
              j["rollouts16_mean"].get<double>(), 1e-12);
}

TEST(Anchors, TwoPromptsEach) {
  const JudgementSet set({direct(Trait::O, Condition::Pos, "a", 0, 80),
                          direct(Trait::O, Condition::Pos, "b", 0, 90),
                          direct(Trait::O, Condition::Neg, "a", 0, 10),
                          direct(Trait::O, Condition::Neg, "b", 0, 30)});
  const auto a = anchors(set, Trait::O);
  EXPECT_EQ(a.s_pos, 85.0);
  EXPECT_EQ(a.s_neg, 20.0);
  EXPECT_EQ(a.n_examples_pos, 2u);
}

TEST(Anchors, SingleExampleEach) {
  const JudgementSet set({direct(Trait::E, Condition::Pos, "a", 0, 66.6),
                          direct(Trait::E, Condition::Neg, "a", 0, 12.3)});
  const auto a = anchors(set, Trait::E);
  EXPECT_EQ(a.s_pos, 66.6);
  EXPECT_EQ(a.s_neg, 12.3);
}

TEST(Anchors, RolloutsAveragedBeforePrompts) {
  // Prompt a has three rollouts, b has one: two-stage mean is (60 + 90) / 2.
  const JudgementSet set({direct(Trait::C, Condition::Pos, "a", 0, 50),
                          direct(Trait::C, Condition::Pos, "a", 1, 60),
                          direct(Trait::C, Condition::Pos, "a", 2, 70),
                          direct(Trait::C, Condition::Pos, "b", 0, 90),
                          direct(Trait::C, Condition::Neg, "a", 0, 5)});
  EXPECT_EQ(anchors(set, Trait::C).s_pos, 75.0);
}

TEST(Anchors, MissingConditionCarriesContext) {
  const JudgementSet set({direct(Trait::A, Condition::Pos, "a", 0, 50)});
  try {
    anchors(set, Trait::A, VariantKey{VariantKind::Questionnaire, 0});
    FAIL();
  } catch (const MissingCondition& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("neg"), std::string::npos);
    EXPECT_NE(msg.find("trait A"), std::string::npos);
    EXPECT_NE(msg.find("questionnaire_0"), std::string::npos);
  }
}

TEST(Property, AnchorsIgnoreInterleaving) {
  const auto judges = load_judgement_records(pvni::testing::fixtures() / "pvni_small" / "judgements.jsonl");
  std::vector<JudgeRecord> shuffled(judges.records().begin(), judges.records().end());
  std::mt19937_64 rng(8);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const JudgementSet other(shuffled);
  for (Trait t : kAllTraits) {
    const auto a = anchors(judges, t), b = anchors(other, t);
    EXPECT_EQ(a.s_pos, b.s_pos);
    EXPECT_EQ(a.s_neg, b.s_neg);
  }
}

TEST(PersonaLoss, ExamplesAndInverse) {
  EXPECT_EQ(persona_loss(Trait::O, 100).value, 0.0);
  EXPECT_EQ(persona_loss(Trait::O, 0).value, 1.0);
  EXPECT_NEAR(persona_loss(Trait::O, 85).value, 0.15, 1e-15);
  EXPECT_THROW(persona_loss(Trait::O, 100.5), OutOfRangeScore);
  for (int k = 0; k <= 1000; ++k) {
    const double l = k / 1000.0;
    EXPECT_NEAR(persona_loss(Trait::N, 100.0 * (1.0 - l)).value, l, 1e-14);
  }
}
