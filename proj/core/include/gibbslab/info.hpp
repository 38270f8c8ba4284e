#pragma once

#include <string>
#include <vector>

#include "gibbslab/core.hpp"
#include "gibbslab/gaussian_world.hpp"

namespace gibbslab {

/// Mutual, lautum and symmetrized KL information in nats.
struct InfoTriple {
  double mutual = 0.0;
  double lautum = 0.0;
  double iskl = 0.0;
  /// Standard error of mutual/lautum when estimated from samples.
  double std_error = 0.0;
  std::vector<std::string> warnings;
};

struct MvGaussian {
  Vector mean;
  Matrix cov;

  static MvGaussian isotropic(const Vector& mean, double variance);
  static MvGaussian from(const GaussianPosterior& p) { return isotropic(p.mean, p.variance); }
  int dim() const { return static_cast<int>(mean.size()); }
};

/// Throws not-positive-definite unless `cov` is symmetric PD with
/// condition number at most 1e12.
void check_spd(const Matrix& cov, const char* what);

double gaussian_kl(const MvGaussian& p, const MvGaussian& q);
double gaussian_skl(const MvGaussian& p, const MvGaussian& q);
double gaussian_kl(const GaussianPosterior& p, const GaussianPosterior& q);
double gaussian_skl(const GaussianPosterior& p, const GaussianPosterior& q);

/// Y = A X + N_G with N_G ~ N(noise_mean, noise_cov).
struct GaussianChannel {
  Matrix A;
  Matrix input_cov;
  Matrix noise_cov;
  Vector noise_mean;

  int dim_x() const { return static_cast<int>(A.cols()); }
  int dim_y() const { return static_cast<int>(A.rows()); }
  void validate() const;
};

/// Closed form for a Gaussian input N(0, input_cov).
InfoTriple channel_info(const GaussianChannel& ch);

/// Input drawn from `input`, centered. I_SKL uses the input covariance
/// (exact moments when the sampler knows them); the mutual/lautum split uses
/// a Gaussian fit of P_Y, which can only underestimate D(P_Y‖P_NG).
InfoTriple channel_info(const GaussianChannel& ch, const SampleDistribution& input,
                        std::uint64_t draws, std::uint64_t seed);

/// Monte Carlo I(X;Y) for a Gaussian input from the log-density ratio
/// log p(y|x) − log p(y).
McEstimate mutual_information_mc(const GaussianChannel& ch, std::uint64_t draws,
                                 std::uint64_t seed, int threads = 0);

/// Channel from the centered target samples to W_α for fixed source data.
GaussianChannel alpha_conditional_channel(const GaussianMeanWorld& world, int m, int n);
/// Channel from the centered target samples to W_c^t.
GaussianChannel beta_conditional_channel(const GaussianMeanWorld& world, int m);
/// Channel from the stacked centered (target, source) samples to W_α.
GaussianChannel alpha_joint_channel(const GaussianMeanWorld& world, int m, int n);

double conditional_iskl_alpha_channel(const GaussianMeanWorld& world, int m, int n);
double conditional_iskl_beta_channel(const GaussianMeanWorld& world, int m);
double joint_iskl_alpha_channel(const GaussianMeanWorld& world, int m, int n);

struct PairIdentity {
  double lhs;
  double rhs;
  double residual;
};

/// lhs = D_SKL between the two Gibbs posteriors, rhs = the caller's gap
/// γ·E_Δ[L_P − L_E].
PairIdentity gibbs_pair_identity_check(const GaussianPosterior& posterior_data,
                                       const GaussianPosterior& posterior_pop, double gap);

/// γα·(E_data − E_pop)[L_P − L_E(·, d_t)] for the α-weighted pair, computed
/// from Gaussian moments.
double alpha_pair_gap(const GaussianMeanWorld& world, const Dataset& ds, const Dataset& dt);
/// γ·(E_data − E_pop)[L_P − L_E] on the specific block for the two-stage pair.
double two_stage_pair_gap(const GaussianMeanWorld& world, VecRef w_phi, const Dataset& dt);

}  // namespace gibbslab
