#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/core.hpp"
#include "gibbslab/random.hpp"
#include "test_util.hpp"

namespace gibbslab {
namespace {

using testing::data;
using testing::expect_error;
using testing::vec;

TEST(EmpiricalRisk, LossAtOwnPoint) {
  SquaredLoss loss;
  EXPECT_DOUBLE_EQ(empirical_risk(loss, vec({0.0}), data({{0.0}})), 0.0);
}

TEST(EmpiricalRisk, MeanOfTwo) {
  SquaredLoss loss;
  EXPECT_DOUBLE_EQ(empirical_risk(loss, vec({1.0}), data({{0.0}, {2.0}})), 1.0);
}

TEST(EmpiricalRisk, PythagoreanTriple) {
  SquaredLoss loss;
  EXPECT_DOUBLE_EQ(empirical_risk(loss, vec({0.0, 0.0}), data({{3.0, 4.0}})), 25.0);
}

TEST(EmpiricalRisk, Errors) {
  SquaredLoss loss;
  expect_error(ErrorCode::kEmptyDataset,
               [&] { empirical_risk(loss, vec({0.0}), Dataset::empty(1, Role::Target)); });
  expect_error(ErrorCode::kDimMismatch,
               [&] { empirical_risk(loss, vec({0.0, 1.0}), data({{1.0}})); });
}

TEST(PopulationRiskMc, ConstantLoss) {
  ConstantLoss loss(2.5);
  IsotropicGaussian p(vec({0.0, 1.0}), 3.0);
  auto r = population_risk_mc(loss, vec({0.0, 0.0}), p, 1000, 7);
  EXPECT_DOUBLE_EQ(r.estimate, 2.5);
  EXPECT_DOUBLE_EQ(r.std_error, 0.0);
  EXPECT_EQ(r.trials, 1000u);
}

TEST(PopulationRiskMc, SquaredLossAtMean) {
  SquaredLoss loss;
  const Vector mu = vec({1.0, -2.0, 0.5});
  IsotropicGaussian p(mu, 2.0);
  auto r = population_risk_mc(loss, mu, p, 200000, 11);
  EXPECT_LT(std::abs(r.estimate - 3 * 2.0), 3.0 * r.std_error);
}

TEST(PopulationRiskMc, DeterministicAndThreadIndependent) {
  SquaredLoss loss;
  IsotropicGaussian p(vec({0.0}), 1.0);
  auto a = population_risk_mc(loss, vec({0.3}), p, 20000, 5, 1);
  auto b = population_risk_mc(loss, vec({0.3}), p, 20000, 5, 4);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(PopulationRiskMc, TooFewTrials) {
  SquaredLoss loss;
  IsotropicGaussian p(vec({0.0}), 1.0);
  expect_error(ErrorCode::kInsufficientTrials,
               [&] { population_risk_mc(loss, vec({0.0}), p, 1, 0); });
}

TEST(AlphaWeightedEnergy, Examples) {
  SquaredLoss loss;
  // L_E(0, {√2}) = 2 and L_E(0, {2}) = 4.
  EXPECT_NEAR(alpha_weighted_energy(loss, vec({0.0}), data({{std::sqrt(2.0)}}), data({{2.0}}), 0.5),
              3.0, 1e-12);
  EXPECT_DOUBLE_EQ(alpha_weighted_energy(loss, vec({0.0}), data({{2.0}}), data({{4.0}}), 0.25),
                   7.0);
  const Dataset d = data({{1.0}, {-3.0}});
  for (double a : {0.1, 0.5, 0.9})
    EXPECT_NEAR(alpha_weighted_energy(loss, vec({0.4}), d, d, a),
                empirical_risk(loss, vec({0.4}), d), 1e-12);
}

TEST(AlphaWeightedEnergy, AlphaRange) {
  SquaredLoss loss;
  for (double a : {0.0, 1.0, -0.2, 1.5})
    expect_error(ErrorCode::kAlphaRange,
                 [&] { alpha_weighted_energy(loss, vec({0.0}), data({{1.0}}), data({{2.0}}), a); });
}

TEST(AlphaWeightedEnergy, MatchesPooledRisk) {
  SquaredLoss loss;
  const Dataset ds = data({{1.0, 2.0}, {0.0, -1.0}, {3.0, 3.0}}, Role::Source);
  const Dataset dt = data({{-1.0, 0.5}, {2.0, 2.0}});
  Matrix pooled(2, 5);
  pooled << ds.samples(), dt.samples();
  const Vector w = vec({0.2, -0.7});
  EXPECT_NEAR(empirical_risk(loss, w, Dataset(pooled, Role::Target)),
              alpha_weighted_energy(loss, w, ds, dt, 2.0 / 5.0), 1e-12);
}

TEST(AlphaWeightedEnergy, MonotoneInAlpha) {
  SquaredLoss loss;
  const Dataset ds = data({{0.0}}, Role::Source);
  const Dataset dt = data({{3.0}});
  double prev = -1.0;
  for (int i = 1; i < 20; ++i) {
    double e = alpha_weighted_energy(loss, vec({0.0}), ds, dt, i / 20.0);
    EXPECT_GT(e, prev);
    prev = e;
  }
  prev = 1e300;
  for (int i = 1; i < 20; ++i) {
    double e = alpha_weighted_energy(loss, vec({0.0}), dt, ds, i / 20.0);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(StageEnergy, Examples) {
  SquaredLoss loss;
  EXPECT_DOUBLE_EQ(stage_energy(loss, vec({1.0}), vec({0.0}), data({{1.0, 2.0}}), Stage::S1), 4.0);
  EXPECT_DOUBLE_EQ(stage_energy(loss, vec({1.0}), vec({2.0}), data({{1.0, 2.0}}), Stage::S2), 0.0);
  const Dataset d = data({{0.5, 1.0, -1.0}, {2.0, 0.0, 1.0}});
  EXPECT_DOUBLE_EQ(stage_energy(loss, vec({0.1}), vec({0.2, 0.3}), d, Stage::S1),
                   empirical_risk(loss, vec({0.1, 0.2, 0.3}), d));
  expect_error(ErrorCode::kDimMismatch,
               [&] { stage_energy(loss, vec({0.0}), vec({0.0}), d, Stage::S2); });
}

TEST(Hypothesis, Blocks) {
  Hypothesis h(vec({1.0, 2.0, 3.0}), Split{1, 2});
  EXPECT_EQ(h.shared(), vec({1.0}));
  EXPECT_EQ(h.specific(), vec({2.0, 3.0}));
  expect_error(ErrorCode::kDimMismatch, [] { Hypothesis(vec({1.0}), Split{1, 1}); });
}

class LossGradient : public ::testing::TestWithParam<int> {};

TEST_P(LossGradient, MatchesCentralDifferences) {
  const int d = GetParam();
  SquaredLoss sq;
  GaussianLogLoss lg(d);
  Rng rng = make_stream(99, 0);
  for (const LossFunction* loss : {static_cast<const LossFunction*>(&sq),
                                   static_cast<const LossFunction*>(&lg)}) {
    for (int probe = 0; probe < 100; ++probe) {
      Vector w(d), z(d);
      fill_standard_normal(rng, w);
      fill_standard_normal(rng, z);
      w *= 2.0;
      const Vector g = loss->gradient(w, z);
      const double h = 1e-5;
      for (int k = 0; k < d; ++k) {
        Vector wp = w, wm = w;
        wp[k] += h;
        wm[k] -= h;
        const double fd = (loss->evaluate(wp, z) - loss->evaluate(wm, z)) / (2 * h);
        EXPECT_NEAR(fd, g[k], 1e-4 * std::max(1.0, std::abs(g[k])))
            << loss->name() << " probe " << probe;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, LossGradient, ::testing::Values(1, 2, 5));

TEST(Losses, Nonnegative) {
  Rng rng = make_stream(3, 0);
  GaussianLogLoss lg(1);
  SquaredLoss sq;
  for (int i = 0; i < 1000; ++i) {
    Vector w(1), z(1);
    fill_standard_normal(rng, w);
    z = w;
    EXPECT_GE(sq.evaluate(w, z), 0.0);
    EXPECT_GE(lg.evaluate(w, z), 0.0);
  }
}

TEST(GibbsSpec, Validation) {
  GibbsSpec spec;
  spec.prior = {vec({0.0}), 1.0};
  spec.gamma = -1.0;
  expect_error(ErrorCode::kDomain, [&] { spec.validate(); });
  spec.gamma = 1.0;
  spec.energy = energy::AlphaWeighted{1.0};
  expect_error(ErrorCode::kAlphaRange, [&] { spec.validate(); });
  spec.prior.variance = 0.0;
  spec.energy = energy::TargetOnly{};
  expect_error(ErrorCode::kDomain, [&] { spec.validate(); });
}

TEST(Random, StreamsAreReproducible) {
  Rng a = make_stream(1, 2, 3), b = make_stream(1, 2, 3), c = make_stream(1, 2, 4);
  EXPECT_EQ(a(), b());
  EXPECT_NE(make_stream(1, 2, 3)(), c());
  EXPECT_NE(derive_seed(5, 0), derive_seed(5, 1));
}

TEST(Random, RunningStatsMerge) {
  RunningStats all, a, b;
  for (int i = 0; i < 10; ++i) {
    all.add(i * i);
    (i < 4 ? a : b).add(i * i);
  }
  a.merge(b);
  EXPECT_EQ(a.count(), all.count());
  EXPECT_NEAR(a.mean(), all.mean(), 1e-12);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-10);
}

}  // namespace
}  // namespace gibbslab
