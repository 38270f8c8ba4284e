#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/asymptotics.hpp"
#include "gibbslab/gaussian_world.hpp"
#include "test_util.hpp"

namespace gibbslab {
namespace {

using testing::expect_error;
using testing::rel_diff;
using testing::vec;

class QuarticLoss final : public LossFunction {
 public:
  std::string name() const override { return "quartic"; }
  double evaluate(VecRef w, VecRef z) const override {
    const double r = (z - w).squaredNorm();
    return r + 0.25 * r * r;
  }
  Vector gradient(VecRef w, VecRef z) const override {
    return -(2.0 + (z - w).squaredNorm()) * (z - w);
  }
  bool has_hessian() const override { return true; }
  Matrix hessian(VecRef w, VecRef z) const override {
    const Vector u = z - w;
    return (2.0 + u.squaredNorm()) * Matrix::Identity(w.size(), w.size()) + 2.0 * u * u.transpose();
  }
};

IsotropicGaussian iso(int d, double mean, double var) {
  return IsotropicGaussian(Vector::Constant(d, mean), var);
}

bool within(const McEstimate& e, double want, double k) {
  return std::abs(e.estimate - want) < k * e.std_error;
}

TEST(Family, DerivativesMatchFiniteDifferences) {
  GaussianLocationFamily f(3);
  Rng rng = make_stream(1, 0);
  for (int probe = 0; probe < 20; ++probe) {
    Vector z(3), w(3);
    fill_standard_normal(rng, z);
    fill_standard_normal(rng, w);
    const Vector s = f.score(z, w);
    const Matrix h = f.hessian(z, w);
    const double eps = 1e-5;
    for (int k = 0; k < 3; ++k) {
      Vector wp = w, wm = w;
      wp[k] += eps;
      wm[k] -= eps;
      EXPECT_NEAR((f.log_density(z, wp) - f.log_density(z, wm)) / (2 * eps), s[k],
                  1e-4 * std::max(1.0, std::abs(s[k])));
      const Vector hs = (f.score(z, wp) - f.score(z, wm)) / (2 * eps);
      EXPECT_LT((hs - h.col(k)).norm(), 1e-4);
    }
  }
}

TEST(Prop1, QuadraticMatchesAnalytic) {
  SquaredLoss loss;
  const int d = 2, m = 3, n = 5;
  auto ps = iso(d, 4.0, 2.0), pt = iso(d, 0.0, 1.5);
  auto e = prop1_gen_erm(loss, ps, pt, m, n, double(m) / (m + n), 2.0 * Matrix::Identity(d, d),
                         100000, 8);
  const double want = 2.0 * d * 1.5 / (m + n);
  EXPECT_TRUE(within(e, want, 3.0)) << e.estimate << " vs " << want;
  // γ → ∞ limit of the Gibbs closed form.
  auto w = GaussianMeanWorld::unit(d);
  w.sigma_t2 = 1.5;
  EXPECT_NEAR(gen_alpha_closed_at_gamma(w, m, n, 1e12), want, 1e-9);
}

TEST(Prop1, DegenerateTarget) {
  SquaredLoss loss;
  auto e = prop1_gen_erm(loss, iso(1, 0.0, 1.0), iso(1, 2.0, 0.0), 2, 2, 0.5,
                         2.0 * Matrix::Identity(1, 1), 1000, 1);
  EXPECT_EQ(e.estimate, 0.0);
}

TEST(Prop1, RejectsNonConstantHessian) {
  QuarticLoss loss;
  expect_error(ErrorCode::kHessianNotConstant, [&] {
    prop1_gen_erm(loss, iso(1, 0.0, 1.0), iso(1, 0.0, 1.0), 2, 2, 0.5, Matrix::Identity(1, 1),
                  100, 1);
  });
  EXPECT_NO_THROW(check_constant_hessian(SquaredLoss{}, 3, 0));
}

TEST(Prop2, QuadraticMatchesAnalytic) {
  SquaredLoss loss;
  const int m = 4;
  auto ps = iso(3, 1.0, 1.0), pt = iso(3, -1.0, 0.5);
  auto e = prop2_gen_erm(loss, ps, pt, Split{1, 2}, m, 6, 2.0 * Matrix::Identity(2, 2), 100000, 9);
  const double want = 2.0 * 2 * 0.5 / m;
  EXPECT_TRUE(within(e, want, 3.0)) << e.estimate << " vs " << want;
  auto w = GaussianMeanWorld::unit(3, 1);
  w.sigma_t2 = 0.5;
  w.sigma2 = 1e-12;  // γ = m/(2σ²) → ∞
  EXPECT_NEAR(gen_beta_closed(w, m), want, 1e-9);
}

TEST(Prop2, NeedsSpecificBlock) {
  SquaredLoss loss;
  expect_error(ErrorCode::kInvalidArgument, [&] {
    prop2_gen_erm(loss, iso(1, 0, 1), iso(1, 0, 1), Split{1, 0}, 2, 2, Matrix(0, 0), 10, 0);
  });
}

TEST(Prop1, RateConstantsAreModerate) {
  GaussianLogLoss loss(2);
  for (int m : {5, 20})
    for (int n : {50, 200}) {
      auto ps = iso(2, 1.0, 1.0), pt = iso(2, 0.0, 1.0);
      auto a = prop1_gen_erm(loss, ps, pt, m, n, double(m) / (m + n), Matrix::Identity(2, 2),
                             20000, 3);
      const double r1 = a.estimate / (2.0 / (m + n));
      EXPECT_GE(r1, 0.5);
      EXPECT_LE(r1, 2.0);
      auto b = prop2_gen_erm(loss, ps, pt, Split{1, 1}, m, n, Matrix::Identity(1, 1), 20000, 3);
      const double r2 = b.estimate / (1.0 / m);
      EXPECT_GE(r2, 0.5);
      EXPECT_LE(r2, 2.0);
    }
}

TEST(FisherBundle, GaussianLocationExact) {
  GaussianLocationFamily f(2);
  auto ps = iso(2, 1.0, 0.5), pt = iso(2, -1.0, 3.0);
  auto b = fisher_bundle(f, ps, pt, vec({0.2, 0.1}), 10, 30, 1000, 0);
  EXPECT_TRUE(b.exact);
  EXPECT_LT((b.J_t - Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LT((b.I_t - 3.0 * Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LT((b.I_bar - (0.25 * b.I_s + 0.75 * b.I_t)).norm(), 1e-12);
  EXPECT_LT((b.J_bar - (0.25 * b.J_s + 0.75 * b.J_t)).norm(), 1e-12);

  auto b0 = fisher_bundle(f, ps, pt, vec({0.0, 0.0}), 0, 5, 1000, 0);
  EXPECT_LT((b0.J_bar - b0.J_t).norm(), 1e-15);
  EXPECT_LT((b0.I_bar - b0.I_t).norm(), 1e-15);
}

TEST(FisherBundle, InformationIdentityWhenWellSpecified) {
  GaussianLocationFamily f(2);
  const Vector w = vec({0.5, -0.5});
  IsotropicGaussian pt(w, 1.0);
  auto b = fisher_bundle(f, pt, pt, w, 1, 1, 100000, 4, true);
  EXPECT_FALSE(b.exact);
  EXPECT_LT((b.I_t - b.J_t).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT((b.I_t - b.I_t.transpose()).norm(), 1e-15);
}

TEST(GenMle, Examples) {
  GaussianLocationFamily f(3);
  auto unit = fisher_bundle(f, iso(3, 1, 1), iso(3, 0, 1), vec({0, 0, 0}), 7, 13, 1000, 0);
  EXPECT_NEAR(gen_alpha_mle(unit, 7, 13, MleVariant::AppendixIt), 3.0 / 20, 1e-14);
  EXPECT_NEAR(gen_alpha_mle(unit, 7, 13, MleVariant::MainTextIbar), 3.0 / 20, 1e-14);

  GaussianLocationFamily f2(2);
  auto b = fisher_bundle(f2, iso(2, 0, 1), iso(2, 0, 4), vec({0, 0}), 10, 10, 1000, 0);
  EXPECT_NEAR(gen_alpha_mle(b, 10, 10), 0.4, 1e-14);
  auto b2 = fisher_bundle(f2, iso(2, 0, 1), iso(2, 0, 4), vec({0, 0}), 20, 20, 1000, 0);
  EXPECT_NEAR(gen_alpha_mle(b2, 20, 20), 0.2, 1e-14);
  EXPECT_NEAR(gen_alpha_mle(b, 10, 10, MleVariant::MainTextIbar), 2 * 2.5 / 20, 1e-14);
}

TEST(GenMle, SingularHessian) {
  FisherBundle b;
  b.J_bar = Matrix::Zero(2, 2);
  b.I_t = b.I_bar = Matrix::Identity(2, 2);
  expect_error(ErrorCode::kSingularHessian, [&] { gen_alpha_mle(b, 1, 1); });
}

TEST(GenBetaMle, Examples) {
  GaussianLocationFamily f(3);
  auto pt = iso(3, 0.0, 1.0);
  EXPECT_NEAR(gen_beta_mle(f, vec({0.0}), vec({0.0, 0.0}), pt, 8, 1000, 0), 2.0 / 8, 1e-14);
  EXPECT_NEAR(gen_beta_mle(f, vec({0.0}), vec({0.0, 0.0}), pt, 16, 1000, 0), 1.0 / 8, 1e-14);
  GaussianLocationFamily g(2);
  EXPECT_NEAR(gen_beta_mle(g, vec({0.0}), vec({0.0}), iso(2, 0.0, 2.0), 5, 1000, 0), 0.4, 1e-14);
}

TEST(Minimizer, ClosedFormAndNewtonAgree) {
  GaussianLocationFamily f(2);
  auto ps = iso(2, 2.0, 1.0), pt = iso(2, -1.0, 1.0);
  const std::vector<Component> parts{{0.25, &ps, nullptr}, {0.75, &pt, nullptr}};
  const Vector w = minimize_neg_log_lik(f, parts, vec({0, 0}));
  EXPECT_LT((w - vec({-0.25, -0.25})).norm(), 1e-12);
}

TEST(ExcessRisk, Rows) {
  GaussianLocationFamily f(2);
  IsotropicGaussian ps(vec({3.0, -1.0}), 1.0), pt(vec({1.0, 1.0}), 1.0);
  auto sup = excess_risk_decomposition(f, ps, pt, 50, 50, MleAlgorithm::Supervised, 2000, 1);
  EXPECT_EQ(sup.bias_sq, 0.0);
  auto alpha = excess_risk_decomposition(f, ps, pt, 50, 50, MleAlgorithm::AlphaWeighted, 2000, 1);
  EXPECT_NEAR(alpha.bias_sq, (4.0 + 4.0) / 4.0, 1e-12);
  EXPECT_NEAR(alpha.total, 0.5 * alpha.bias_sq + 0.5 * alpha.variance, 1e-14);

  IsotropicGaussian ps_shared(vec({1.0, 9.0}), 2.0);
  auto two = excess_risk_decomposition(f, ps_shared, pt, 50, 50, MleAlgorithm::TwoStage, 2000, 1, 1);
  EXPECT_NEAR(two.bias_sq, 0.0, 1e-20);
  EXPECT_LT((two.w_alg_star - two.w_t_star).norm(), 1e-12);
}

TEST(ExcessRisk, QuadraticApproximationIsTight) {
  GaussianLocationFamily f(2);
  IsotropicGaussian ps(vec({0.4, 0.0}), 2.0), pt(vec({0.0, 0.0}), 1.0);
  for (auto alg : {MleAlgorithm::Supervised, MleAlgorithm::AlphaWeighted}) {
    auto r = excess_risk_decomposition(f, ps, pt, 200, 200, alg, 20000, 6);
    EXPECT_LE(rel_diff(r.empirical_excess, r.total), 0.1) << to_string(alg);
  }
}

TEST(MleGen, MatchesProp1Extrapolation) {
  GaussianLocationFamily f(2);
  auto ps = iso(2, 1.0, 1.0), pt = iso(2, 0.0, 2.0);
  const int n = 60, m = 40;
  auto b = fisher_bundle(f, ps, pt, vec({0.6, 0.6}), n, m, 1000, 0);
  auto p1 = prop1_gen_erm(GaussianLogLoss(2), ps, pt, m, n, double(m) / (m + n),
                          Matrix::Identity(2, 2), 50000, 5);
  EXPECT_TRUE(within(p1, gen_alpha_mle(b, n, m), 3.0));
  auto emp = mle_gen_empirical(f, ps, pt, n, m, 20000, 5);
  EXPECT_TRUE(within(emp, gen_alpha_mle(b, n, m), 3.0)) << emp.estimate;
}

TEST(Normality, CovarianceMatchesLemma) {
  GaussianLocationFamily f(2);
  auto ps = iso(2, 1.0, 1.0), pt = iso(2, 0.0, 2.0);
  auto rows = asymptotic_normality_check(f, ps, pt, {200}, {200}, 10000, 2, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LT(rows[0].alpha_deviation, 0.1);
  EXPECT_LT(rows[0].beta_deviation, 0.1);
}

TEST(Normality, DegenerateTarget) {
  GaussianLocationFamily f(1);
  auto rows = asymptotic_normality_check(f, iso(1, 0, 1), iso(1, 0, 0), {20}, {20}, 200, 2);
  EXPECT_EQ(rows[0].alpha_trace_empirical, 0.0);
  EXPECT_EQ(rows[0].alpha_trace_predicted, 0.0);
  EXPECT_EQ(rows[0].alpha_deviation, 0.0);
}

TEST(Normality, ScaledCovarianceStable) {
  GaussianLocationFamily f(1);
  auto rows = asymptotic_normality_check(f, iso(1, 1, 1), iso(1, 0, 1), {50, 200}, {50, 200},
                                         8000, 3);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows)
    if (r.n == r.m) EXPECT_NEAR(r.alpha_trace_empirical / r.alpha_trace_predicted, 1.0, 0.1);
}

}  // namespace
}  // namespace gibbslab
