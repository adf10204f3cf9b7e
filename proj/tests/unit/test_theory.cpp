#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pvni/errors.hpp"
#include "pvni/theory_lab.hpp"

using namespace pvni;
using namespace pvni::theory;

namespace {

MatrixXd pair_gram(double alpha) {
  MatrixXd g(2, 2);
  g << 1.0, alpha, alpha, 1.0;
  return g;
}

SyntheticWorld pair_world(double alpha, std::uint64_t seed = 17, WorldParams p = {}) {
  return make_world(64, 2, pair_gram(alpha), p, seed);
}

std::vector<double> grid() { return lambda_grid(-3.0, 3.0, 0.05); }

}  // namespace

TEST(World, OrthonormalGram) {
  const auto w = make_world(64, 5, MatrixXd::Identity(5, 5), {}, 1);
  const MatrixXd g = w.directions.transpose() * w.directions;
  EXPECT_LE((g - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(std::abs(w.residual_direction.dot(w.directions.col(0))), 1e-12);
  EXPECT_LE(std::abs(w.curvature_direction.dot(w.residual_direction)), 1e-12);
}

TEST(World, PrescribedCorrelation) {
  MatrixXd g = MatrixXd::Identity(3, 3);
  g(0, 1) = g(1, 0) = -0.5;
  g(1, 2) = g(2, 1) = 0.3;
  const auto w = make_world(64, 3, g, {}, 2);
  EXPECT_LE(((w.directions.transpose() * w.directions) - g).cwiseAbs().maxCoeff(), 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(w.mean.dot(w.direction(i)), 1.0, 1e-12);
  }
}

TEST(World, SameSeedIsBitwiseIdentical) {
  const auto a = pair_world(0.2, 99);
  const auto b = pair_world(0.2, 99);
  EXPECT_TRUE(a.directions == b.directions);
  EXPECT_TRUE(a.mean == b.mean);
  EXPECT_TRUE(a.residual_maps[1] == b.residual_maps[1]);
  EXPECT_EQ(a.calibration_margin, b.calibration_margin);
  const auto c = pair_world(0.2, 100);
  EXPECT_FALSE(a.directions == c.directions);
}

TEST(World, InfeasibleGramTargets) {
  MatrixXd g = MatrixXd::Identity(3, 3);
  g(0, 1) = g(1, 0) = 0.9;
  g(0, 2) = g(2, 0) = 0.9;
  g(1, 2) = g(2, 1) = -0.9;
  EXPECT_THROW(make_world(64, 3, g, {}, 1), InfeasibleGram);
  MatrixXd asym = MatrixXd::Identity(2, 2);
  asym(0, 1) = 0.3;
  EXPECT_THROW(make_world(64, 2, asym, {}, 1), InfeasibleGram);
  MatrixXd diag = MatrixXd::Identity(2, 2) * 2.0;
  EXPECT_THROW(make_world(64, 2, diag, {}, 1), InfeasibleGram);
  EXPECT_THROW(make_world(3, 2, pair_gram(0.0), {}, 1), InfeasibleGram);
}

TEST(PersonaShift, Examples) {
  WorldParams p;
  p.trait.amplifier = 1.0;
  const auto w = pair_world(0.0, 5, p);
  const VectorXd mu = w.direction(0);
  EXPECT_LE((persona_shift(mu, 0, w) - 2.0 * mu).cwiseAbs().maxCoeff(), 1e-15);
  VectorXd h = w.residual_direction + 0.5 * w.direction(1);
  EXPECT_LE((persona_shift(h, 0, w) - h).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PersonaShift, ResidualBoundMonteCarlo) {
  const auto w = with_beta(pair_world(0.1, 6), 0.1);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int s = 0; s < 10000; ++s) {
    VectorXd h(64);
    for (int k = 0; k < 64; ++k) h(k) = n(rng);
    const std::size_t i = s % 2;
    const VectorXd exact = h + w.traits[i].amplifier * h.dot(w.direction(i)) * w.direction(i);
    EXPECT_LE((persona_shift(h, i, w) - exact).norm(), 0.1 * h.norm());
  }
}

TEST(Property, RankOneAtZeroBeta) {
  const auto w = pair_world(-0.4, 8);
  const auto states = sample_typical_states(w, 500, 8);
  for (const auto& h : states) {
    for (std::size_t i = 0; i < 2; ++i) {
      const VectorXd d = persona_shift(h, i, w) - h;
      EXPECT_GE(std::abs(d.dot(w.direction(i))) / d.norm(), 1.0 - 1e-10);
    }
  }
}

TEST(Loss, CalibrationIdentity) {
  const auto w = pair_world(0.0, 9);
  EXPECT_EQ(loss_at_margin(w.calibration_margin[0], 0, w), w.epsilon);
}

TEST(Loss, AdaptedTypicalStatesBelowEpsilon) {
  for (double beta : {0.0, 0.05}) {
    WorldParams p;
    p.beta = beta;
    const auto w = pair_world(0.3, 10, p);
    const auto states = sample_typical_states(w, 1000, 10);
    for (std::size_t i = 0; i < 2; ++i) {
      const VectorXd vp = persona_vector(w, i);
      for (const auto& h : states) {
        ASSERT_LE((h - w.mean).norm(), w.typical_radius);
        EXPECT_LE(synthetic_loss(h + vp, i, w), w.epsilon);
      }
    }
  }
}

TEST(Loss, MonotoneAlongTraitDirection) {
  const auto w = pair_world(0.0, 11);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.5);
  std::uniform_real_distribution<double> step(0.0, 0.5);
  for (int k = 0; k < 1000; ++k) {
    VectorXd h = w.mean;
    for (int j = 0; j < 64; ++j) h(j) += n(rng);
    const VectorXd higher = h + step(rng) * w.direction(0);
    EXPECT_LE(synthetic_loss(higher, 0, w), synthetic_loss(h, 0, w));
  }
}

TEST(Loss, LinearRegimeDependsOnProjectionOnly) {
  WorldParams p;
  p.trait.curvature = 0.0;
  const auto w = pair_world(0.0, 12, p);
  const VectorXd a = w.mean + 0.3 * w.direction(0);
  const VectorXd b = a + 0.7 * w.curvature_direction - 0.2 * w.residual_direction;
  EXPECT_EQ(margin(a, 0, w), margin(b, 0, w));
  EXPECT_EQ(synthetic_loss(a, 0, w), synthetic_loss(b, 0, w));
}

TEST(Compose, ExamplesAndLinearity) {
  const auto w = pair_world(0.0, 13);
  const VectorXd h = w.mean;
  const VectorXd vi = persona_vector(w, 0), vj = persona_vector(w, 1);
  EXPECT_TRUE(compose(h, 0, 1, 0.0, w) == h + vi);
  const VectorXd both = compose(h, 0, 1, 1.0, w);
  EXPECT_NEAR(both.dot(w.direction(0)) - h.dot(w.direction(0)), vi.dot(w.direction(0)), 1e-12);
  EXPECT_NEAR(both.dot(w.direction(1)) - h.dot(w.direction(1)), vj.dot(w.direction(1)), 1e-12);
  EXPECT_THROW(compose(h, 1, 1, 1.0, w), SameTrait);
  // Dyadic lambdas keep every product exact.
  for (double l1 : {-2.0, -0.5, 0.25}) {
    for (double l2 : {-1.0, 0.75, 3.0}) {
      const VectorXd lhs = compose(h, 0, 1, l1, w) + (l2 - l1) * vj;
      EXPECT_LE((lhs - compose(h, 0, 1, l2, w)).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(Composition, OrthogonalBothLossesSmallAtLambdaOne) {
  const auto w = pair_world(0.0, 14);
  const auto states = sample_typical_states(w, 1000, 14);
  const VectorXd shift = persona_vector(w, 0) + persona_vector(w, 1);
  EXPECT_LE(population_loss(states, shift, 0, w), 0.02);
  EXPECT_LE(population_loss(states, shift, 1, w), 0.02);
  const auto r = check_composition(w, 0.0, grid(), states, {}, 0.2);
  EXPECT_TRUE(r.passed());
}

TEST(Composition, AlignedThresholdHalf) {
  const auto w = pair_world(0.5, 15);
  const auto states = sample_typical_states(w, 1000, 15);
  const auto r = check_composition(w, 0.5, grid(), states, {}, 0.2);
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.find("composition.aligned.loss_j")->parameters["lambda_threshold"].get<double>(), 0.5,
              1e-10);
  const VectorXd vi = persona_vector(w, 0), vj = persona_vector(w, 1);
  const double at_half = population_loss(states, vi + 0.5 * vj, 1, w);
  const double at_one = population_loss(states, vi + vj, 1, w);
  EXPECT_LE(std::abs(at_half - at_one), 2.0 * w.epsilon);
}

TEST(Composition, ContradictoryTradeoff) {
  const auto w = pair_world(-0.9, 16);
  const auto states = sample_typical_states(w, 1000, 16);
  const auto r = check_composition(w, -0.9, grid(), states, {}, 0.2);
  ASSERT_NE(r.find("composition.contradictory.tradeoff"), nullptr);
  EXPECT_GE(r.find("composition.contradictory.tradeoff")->measured, 0.2);
}

TEST(Negation, OrthogonalProbe) {
  const auto w = pair_world(0.0, 18);
  const auto states = sample_typical_states(w, 1000, 18);
  const auto r = check_negation(w, NegationRegime::Orthogonal, grid(), states, {}, {});
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.find("negation.orthogonal.loss_j_suppressed")->measured, 0.2);
  EXPECT_LE(r.find("negation.orthogonal.loss_i_preserved")->measured, 0.05);
}

TEST(Negation, ContradictoryIntervalNonempty) {
  const auto w = pair_world(-0.5, 19);
  const auto states = sample_typical_states(w, 1000, 19);
  const auto r = check_negation(w, NegationRegime::Contradictory, grid(), states, {}, {});
  EXPECT_TRUE(r.passed());
  EXPECT_GT(r.constants["c2_measured"].get<double>(), 0.0);
}

TEST(Negation, MildlyAligned) {
  const auto w = pair_world(0.3, 20);
  const auto states = sample_typical_states(w, 1000, 20);
  const auto r = check_negation(w, NegationRegime::MildlyAligned, grid(), states, {}, {});
  EXPECT_TRUE(r.passed());
  EXPECT_LE(population_loss(states, persona_vector(w, 0), 0, w), w.epsilon + 1e-12);
}

TEST(Negation, RegimeMismatch) {
  const auto w = pair_world(0.3, 21);
  const auto states = sample_typical_states(w, 10, 21);
  EXPECT_THROW(check_negation(w, NegationRegime::Contradictory, grid(), states, {}, {}),
               RegimeMismatch);
  EXPECT_THROW(check_negation(w, NegationRegime::Orthogonal, grid(), states, {}, {}), RegimeMismatch);
}

namespace {

struct OodSetup {
  SyntheticWorld world;
  std::vector<VectorXd> states;
  VectorXd direction;
};

OodSetup ood_setup(std::uint64_t seed) {
  OodSetup s{make_world(64, 5, MatrixXd::Identity(5, 5), {}, seed), {}, VectorXd(5)};
  s.states = sample_typical_states(s.world, 1000, seed);
  s.direction << 0.6, 0.5, 0.4, 0.3, 0.2;
  s.direction.normalize();
  return s;
}

}  // namespace

TEST(Ood, ZeroKappaWithinTwoEpsilon) {
  const auto s = ood_setup(30);
  const VectorXd lambda = minimal_ood_weights(s.direction, 0.1);
  const auto spec = make_ood_spec(s.direction, 0.0, 0.0, lambda, 0.1);
  const auto r = check_ood_synthesis(s.world, spec, s.states, {});
  EXPECT_TRUE(r.passed());
  EXPECT_LE(r.find("ood.loss_bound")->measured, 2.0 * s.world.epsilon);
  EXPECT_EQ(r.find("ood.kappa_scaling"), nullptr);
}

TEST(Ood, KappaDoublingRatio) {
  const auto s = ood_setup(31);
  const VectorXd lambda = minimal_ood_weights(std::sqrt(1.0 - 0.04) * s.direction, 0.1);
  const auto spec = make_ood_spec(s.direction, 0.1, 0.1, lambda, 0.1);
  const auto r = check_ood_synthesis(s.world, spec, s.states, {});
  const double ratio = r.find("ood.kappa_scaling")->measured;
  EXPECT_GE(ratio, 2.0);
  EXPECT_LE(ratio, 8.0);
}

TEST(Ood, OneHotConstructionSatisfiesConditions) {
  VectorXd gamma = VectorXd::Zero(5);
  gamma(2) = 1.0;
  const VectorXd lambda = gamma * (1.0 + 0.1) / gamma.squaredNorm();
  EXPECT_NO_THROW(verify_ood_conditions(make_ood_spec(gamma, 0.0, 0.0, lambda, 0.1), 0.0));
}

TEST(Ood, ViolationsAreNamed) {
  VectorXd gamma(2);
  gamma << 0.8, 0.6;
  const auto weak = make_ood_spec(gamma, 0.0, 0.0, gamma, 0.1);
  try {
    verify_ood_conditions(weak, 0.0);
    FAIL();
  } catch (const ConditionViolated& e) {
    EXPECT_NE(std::string(e.what()).find("gamma_i"), std::string::npos);
  }
  const VectorXd lambda = minimal_ood_weights(gamma, 0.1);
  EXPECT_NO_THROW(verify_ood_conditions(make_ood_spec(gamma, 0.0, 0.0, lambda, 0.1), 0.0));
  EXPECT_THROW(verify_ood_conditions(make_ood_spec(gamma, 0.2, 0.1, lambda, 0.1), 0.0),
               ConditionViolated);
  EXPECT_THROW(verify_ood_conditions(make_ood_spec(gamma, 0.0, 0.0, lambda, 0.1), 1.0),
               ConditionViolated);
}

TEST(Pruning, ZeroOffRowsChangeNothing) {
  const auto w = make_world(64, 5, MatrixXd::Identity(5, 5), {}, 40);
  const auto states = sample_typical_states(w, 100, 40);
  const auto mlp = make_mlp_update(w, 1, 256, 0.25, 1.0, 1.0, 40, 0.0);
  for (const auto& h : states) EXPECT_TRUE(mlp_shift(mlp, h, false) == mlp_shift(mlp, h, true));
  EXPECT_EQ(check_pruning(w, mlp, states).find("shift.pruning_envelope")->measured, 0.0);
}

TEST(Pruning, FullSupportPrunedEqualsFull) {
  const auto w = make_world(64, 5, MatrixXd::Identity(5, 5), {}, 41);
  const auto states = sample_typical_states(w, 50, 41);
  const auto mlp = make_mlp_update(w, 0, 128, 1.0, 1.0, 1.0, 41);
  for (const auto& h : states) EXPECT_TRUE(mlp_shift(mlp, h, false) == mlp_shift(mlp, h, true));
}

TEST(Pruning, EnvelopeAtBound) {
  const auto w = make_world(64, 5, MatrixXd::Identity(5, 5), {}, 42);
  const auto states = sample_typical_states(w, 1000, 42);
  const auto mlp = make_mlp_update(w, 0, 1024, 0.25, 1.0, 1.0, 42);
  const auto r = check_pruning(w, mlp, states);
  EXPECT_TRUE(r.passed());
}

TEST(Checks, DeterministicUnderSeed) {
  const auto w = pair_world(-0.5, 50);
  const auto a = check_negation(w, NegationRegime::Contradictory, grid(),
                                sample_typical_states(w, 200, 3), {}, {});
  const auto b = check_negation(w, NegationRegime::Contradictory, grid(),
                                sample_typical_states(w, 200, 3), {}, {});
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Sampling, AntitheticPairsInsideRadius) {
  const auto w = pair_world(0.0, 60);
  const auto states = sample_typical_states(w, 101, 60);
  ASSERT_EQ(states.size(), 101u);
  for (std::size_t k = 0; k + 1 < states.size(); k += 2) {
    EXPECT_LE(((states[k] + states[k + 1]) / 2.0 - w.mean).cwiseAbs().maxCoeff(), 1e-15);
  }
  for (const auto& h : states) EXPECT_LE((h - w.mean).norm(), w.typical_radius);
}

TEST(Grid, LambdaGridIsExactMultiples) {
  const auto g = lambda_grid(-3.0, 3.0, 0.05);
  ASSERT_EQ(g.size(), 121u);
  EXPECT_EQ(g.front(), -60 * 0.05);
  EXPECT_EQ(g[60], 0.0);
}
