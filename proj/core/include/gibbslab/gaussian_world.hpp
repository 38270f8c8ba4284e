#pragma once

#include <optional>

#include "gibbslab/core.hpp"

namespace gibbslab {

/// Conjugate Gaussian mean-estimation world with squared loss.
/// Source and target samples are N(mu_s, sigma_s2 I) and N(mu_t, sigma_t2 I);
/// the prior is N(mu_0, sigma_0_2 I) and sigma2 sets the inverse temperature.
struct GaussianMeanWorld {
  int d = 1;
  int d_phi = 0;
  int d_c = 1;
  Vector mu_s;
  Vector mu_t;
  double sigma_s2 = 1.0;
  double sigma_t2 = 1.0;
  Vector mu_0;
  double sigma_0_2 = 1.0;
  double sigma2 = 1.0;
  /// Stage-specific prior means; default to the matching blocks of mu_0.
  std::optional<Vector> mu_1_phi;
  std::optional<Vector> mu_2_c;

  /// All means zero, all variances one, d_c = d - d_phi.
  static GaussianMeanWorld unit(int d, int d_phi = 0);

  void validate() const;

  Vector prior_phi() const;
  Vector prior_c() const;
  IsotropicGaussian source() const { return {mu_s, sigma_s2}; }
  IsotropicGaussian target() const { return {mu_t, sigma_t2}; }

  /// γ = (m+n)/(2σ²) and α = m/(m+n).
  double alpha_gamma(int m, int n) const;
  double alpha_weight(int m, int n) const;
  /// γ = m/(2σ²) for the second stage and n/(2σ²) for the first.
  double stage_two_gamma(int m) const;
  double stage_one_gamma(int n) const;

  /// Variances σ_1², σ_φ², σ_c² of the posteriors at the conjugate γ.
  double sigma_1_2(int m, int n) const;
  double sigma_phi_2(int n) const;
  double sigma_c_2(int m) const;

  /// L_P(w) = ‖w − μ_t‖² + dσ_t².
  double target_population_risk(VecRef w) const;
  /// L_P under the source law, ‖w − μ_s‖² + dσ_s².
  double source_population_risk(VecRef w) const;
};

/// Exact posterior of a GibbsSpec whose loss is scale·‖z−w‖² + const and
/// whose prior is Gaussian. Works for any γ ≥ 0 (γ = 0 gives the prior).
/// For StageTwo the posterior is over the specific block.
GaussianPosterior conjugate_posterior(const GibbsSpec& spec, const QuadraticForm& loss,
                                      const Dataset& ds, const Dataset& dt);

GaussianPosterior alpha_posterior(const GaussianMeanWorld& world, const Dataset& ds,
                                  const Dataset& dt);
/// Gibbs posterior of the L_α-population energy α·L_P + (1−α)·L_E(·, d_s).
GaussianPosterior alpha_population_posterior(const GaussianMeanWorld& world, const Dataset& ds,
                                             int m);

/// Stage one over the shared block, γ = n/(2σ²).
GaussianPosterior stage_one_posterior(const GaussianMeanWorld& world, const Dataset& ds);
GaussianPosterior two_stage_posterior(const GaussianMeanWorld& world, VecRef w_phi,
                                      const Dataset& dt);
GaussianPosterior two_stage_population_posterior(const GaussianMeanWorld& world, VecRef w_phi,
                                                 int m);

double iskl_alpha(const GaussianMeanWorld& world, int m, int n);
double iskl_beta(const GaussianMeanWorld& world, int m);

double gen_alpha_closed(const GaussianMeanWorld& world, int m, int n);
/// Same algorithm at an arbitrary inverse temperature, α = m/(m+n).
double gen_alpha_closed_at_gamma(const GaussianMeanWorld& world, int m, int n, double gamma);
/// Arbitrary γ and weight α: 2α·dσ₀²σ_t²/(m(σ₀² + 1/(2γ))).
double gen_alpha_closed_weighted(const GaussianMeanWorld& world, int m, int n, double gamma,
                                 double alpha);
double gen_beta_closed(const GaussianMeanWorld& world, int m);
double gen_supervised_closed(const GaussianMeanWorld& world, int m);

struct ExcessRiskAlpha {
  double bias_sq;
  double variance;
  double total;
};

struct ExcessRiskTwoStage {
  double bias_sq_phi;
  double bias_sq_c;
  double variance_phi;
  double variance_c;
  double total;
};

ExcessRiskAlpha excess_risk_alpha(const GaussianMeanWorld& world, int m, int n);
/// Stage-one output is a Gibbs draw; the reference point is the target mean.
ExcessRiskTwoStage excess_risk_two_stage(const GaussianMeanWorld& world, int m, int n);

}  // namespace gibbslab
