#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/gaussian_world.hpp"
#include "gibbslab/info.hpp"
#include "test_util.hpp"

namespace gibbslab {
namespace {

using testing::data;
using testing::expect_error;
using testing::rel_diff;
using testing::vec;

MvGaussian g1(double mean, double var) { return MvGaussian::isotropic(vec({mean}), var); }

TEST(GaussianKl, Examples) {
  EXPECT_EQ(gaussian_kl(g1(0.3, 2.0), g1(0.3, 2.0)), 0.0);
  EXPECT_NEAR(gaussian_kl(g1(0.0, 1.0), g1(1.0, 1.0)), 0.5, 1e-15);
  EXPECT_NEAR(gaussian_kl(g1(0.0, 2.0), g1(0.0, 1.0)), 0.5 * (2.0 - 1.0 - std::log(2.0)), 1e-15);
  EXPECT_NEAR(gaussian_kl(g1(0.0, 2.0), g1(0.0, 1.0)), 0.153426, 1e-6);
}

TEST(GaussianKl, FullCovariance) {
  MvGaussian p{vec({1.0, 0.0}), Matrix::Identity(2, 2)};
  MvGaussian q{vec({0.0, 0.0}), Matrix::Identity(2, 2)};
  p.cov << 2.0, 0.5, 0.5, 1.0;
  q.cov << 1.0, -0.2, -0.2, 3.0;
  // Independent evaluation through explicit inverses.
  const Matrix qi = q.cov.inverse();
  const Vector dm = q.mean - p.mean;
  const double want = 0.5 * ((qi * p.cov).trace() + dm.dot(qi * dm) - 2.0 +
                             std::log(q.cov.determinant() / p.cov.determinant()));
  EXPECT_NEAR(gaussian_kl(p, q), want, 1e-13);
}

TEST(GaussianKl, NotPositiveDefinite) {
  MvGaussian p{vec({0.0, 0.0}), Matrix::Identity(2, 2)};
  MvGaussian q{vec({0.0, 0.0}), Matrix::Zero(2, 2)};
  q.cov(0, 0) = 1.0;
  expect_error(ErrorCode::kNotPositiveDefinite, [&] { gaussian_kl(p, q); });
  q.cov(1, 1) = 1e-14;
  expect_error(ErrorCode::kNotPositiveDefinite, [&] { gaussian_kl(p, q); });
}

TEST(GaussianKl, PositiveUnderPerturbation) {
  const MvGaussian base = MvGaussian::isotropic(vec({0.2, -0.4, 1.0}), 1.5);
  for (double eps : {1e-3, 1e-1, 1.0}) {
    auto shifted = base;
    shifted.mean[1] += eps;
    auto widened = base;
    widened.cov(2, 2) += eps;
    EXPECT_GT(gaussian_kl(base, shifted), 0.0);
    EXPECT_GT(gaussian_kl(widened, base), 0.0);
  }
}

TEST(GaussianSkl, Examples) {
  EXPECT_EQ(gaussian_skl(g1(1.0, 1.0), g1(1.0, 1.0)), 0.0);
  EXPECT_NEAR(gaussian_skl(g1(0.0, 1.0), g1(1.0, 1.0)), 1.0, 1e-15);
  const auto p = g1(0.5, 0.3), q = g1(-1.0, 2.0);
  EXPECT_DOUBLE_EQ(gaussian_skl(p, q), gaussian_skl(q, p));
  // Equal covariances: ‖Δμ‖²/σ².
  EXPECT_NEAR(gaussian_skl(MvGaussian::isotropic(vec({0.0, 0.0}), 0.5),
                           MvGaussian::isotropic(vec({1.0, 2.0}), 0.5)),
              5.0 / 0.5, 1e-13);
}

TEST(ChannelInfo, Examples) {
  GaussianChannel ch{Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2),
                     Matrix::Identity(2, 2), Vector::Zero(2)};
  auto t = channel_info(ch);
  EXPECT_NEAR(t.iskl, 4.0, 1e-14);
  EXPECT_NEAR(t.mutual + t.lautum, t.iskl, 1e-12);
  // I(X;Y) = ½ log det(I + AΣAᵀΣ_N⁻¹) for this channel.
  EXPECT_NEAR(t.mutual, std::log(3.0), 1e-13);

  ch.A.setZero();
  auto z = channel_info(ch);
  EXPECT_EQ(z.iskl, 0.0);
  EXPECT_NEAR(z.mutual, 0.0, 1e-15);
  EXPECT_NEAR(z.lautum, 0.0, 1e-15);
}

TEST(ChannelInfo, ScalarFormula) {
  for (int d : {1, 3})
    for (double a : {0.5, 2.0})
      for (double sx : {0.3, 1.0})
        for (double sn : {0.2, 4.0}) {
          GaussianChannel ch{a * Matrix::Identity(d, d), sx * Matrix::Identity(d, d),
                             sn * Matrix::Identity(d, d), Vector::Zero(d)};
          auto t = channel_info(ch);
          EXPECT_LE(rel_diff(t.iskl, d * a * a * sx / sn), 1e-12);
          EXPECT_NEAR(t.mutual + t.lautum, t.iskl, 1e-12);
          EXPECT_GE(t.mutual, 0.0);
          EXPECT_GE(t.lautum, 0.0);
        }
}

TEST(ChannelInfo, NoiseMeanLeavesIsklUnchanged) {
  GaussianChannel ch{Matrix::Random(2, 3), Matrix::Identity(3, 3), 0.5 * Matrix::Identity(2, 2),
                     Vector::Zero(2)};
  const double base = channel_info(ch).iskl;
  ch.noise_mean = vec({3.0, -7.0});
  EXPECT_EQ(channel_info(ch).iskl, base);
}

TEST(ChannelInfo, SingularNoise) {
  GaussianChannel ch{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 2),
                     Vector::Zero(2)};
  expect_error(ErrorCode::kNotPositiveDefinite, [&] { channel_info(ch); });
}

TEST(ChannelInfo, SampledInputMatchesClosedForm) {
  GaussianChannel ch{2.0 * Matrix::Identity(2, 2), 0.5 * Matrix::Identity(2, 2),
                     Matrix::Identity(2, 2), Vector::Zero(2)};
  IsotropicGaussian input(vec({4.0, 4.0}), 0.5);  // centered internally
  auto exact = channel_info(ch);
  auto est = channel_info(ch, input, 200000, 3);
  EXPECT_NEAR(est.iskl, exact.iskl, 1e-12);
  EXPECT_NEAR(est.mutual, exact.mutual, 0.02);
  EXPECT_NEAR(est.mutual + est.lautum, est.iskl, 1e-12);
}

TEST(MutualInformationMc, AgreesWithClosedForm) {
  GaussianChannel ch{Matrix::Identity(2, 2), 1.5 * Matrix::Identity(2, 2),
                     0.8 * Matrix::Identity(2, 2), Vector::Zero(2)};
  ch.A(0, 1) = 0.4;
  auto est = mutual_information_mc(ch, 100000, 12);
  EXPECT_LT(std::abs(est.estimate - channel_info(ch).mutual), 3.0 * est.std_error);
}

TEST(ConditionalChannel, MatchesWorldFormula) {
  auto w = GaussianMeanWorld::unit(1);
  EXPECT_NEAR(conditional_iskl_alpha_channel(w, 1, 1), 1.0 / 3.0, 1e-15);
  for (int d : {1, 3})
    for (int m : {1, 4})
      for (int n : {0, 2, 9}) {
        auto v = GaussianMeanWorld::unit(d);
        v.sigma_0_2 = 1.7;
        v.sigma_t2 = 0.6;
        v.sigma2 = 2.2;
        EXPECT_LE(rel_diff(conditional_iskl_alpha_channel(v, m, n), iskl_alpha(v, m, n)), 1e-12);
        // AAᵀ = (mσ₁⁴/σ⁴)·I.
        auto ch = alpha_conditional_channel(v, m, n);
        const double s1 = v.sigma_1_2(m, n);
        EXPECT_LT((ch.A * ch.A.transpose() - (m * s1 * s1 / (2.2 * 2.2)) * Matrix::Identity(d, d))
                      .norm(),
                  1e-12);
      }
  w.sigma_t2 = 0.0;
  EXPECT_EQ(conditional_iskl_alpha_channel(w, 2, 2), 0.0);
}

TEST(ConditionalChannel, BetaMatchesGen) {
  auto w = GaussianMeanWorld::unit(3, 1);
  w.sigma_t2 = 2.0;
  for (int m : {1, 5, 30})
    EXPECT_LE(rel_diff(conditional_iskl_beta_channel(w, m),
                       w.stage_two_gamma(m) * gen_beta_closed(w, m)),
              1e-12);
}

TEST(GibbsPairIdentity, Examples) {
  GaussianPosterior p{vec({1.0, 2.0}), 0.5};
  auto same = gibbs_pair_identity_check(p, p, 0.0);
  EXPECT_EQ(same.lhs, 0.0);
  EXPECT_EQ(same.residual, 0.0);

  GaussianPosterior q{vec({1.0, 2.6}), 0.5};
  auto r = gibbs_pair_identity_check(p, q, 0.36 / 0.5);
  EXPECT_NEAR(r.lhs, 0.36 / 0.5, 1e-14);
  EXPECT_LT(r.residual, 1e-10);
}

TEST(GibbsPairIdentity, AlphaPairOnGrid) {
  Rng rng = make_stream(8, 0);
  for (int m : {1, 3})
    for (int n : {1, 4}) {
      auto w = GaussianMeanWorld::unit(2);
      w.mu_s = vec({1.0, -2.0});
      w.sigma_0_2 = 0.7;
      const Dataset ds(w.source().draw_matrix(rng, n), Role::Source);
      const Dataset dt(w.target().draw_matrix(rng, m), Role::Target);
      const auto pd = alpha_posterior(w, ds, dt);
      const auto pp = alpha_population_posterior(w, ds, m);
      auto r = gibbs_pair_identity_check(pd, pp, alpha_pair_gap(w, ds, dt));
      EXPECT_LT(r.residual, 1e-10) << m << "," << n;
    }
}

TEST(GibbsPairIdentity, TwoStagePair) {
  Rng rng = make_stream(9, 0);
  auto w = GaussianMeanWorld::unit(3, 1);
  const Vector phi = vec({0.4});
  const Dataset dt(w.target().draw_matrix(rng, 4), Role::Target);
  auto r = gibbs_pair_identity_check(two_stage_posterior(w, phi, dt),
                                     two_stage_population_posterior(w, phi, 4),
                                     two_stage_pair_gap(w, phi, dt));
  EXPECT_LT(r.residual, 1e-10);
}

}  // namespace
}  // namespace gibbslab
