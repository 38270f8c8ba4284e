#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gibbslab/bounds.hpp"
#include "gibbslab/core.hpp"
#include "gibbslab/gaussian_world.hpp"
#include "gibbslab/samplers.hpp"

namespace gibbslab {

enum class GibbsAlgorithm { AlphaGibbs, TwoStageGibbs, Supervised };
enum class PosteriorMode { Exact, SGLD };

std::string_view to_string(GibbsAlgorithm a);
std::string_view to_string(PosteriorMode m);

struct GenEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
};

struct GenOptions {
  /// Inverse temperature; the world default is the conjugate setting
  /// (m+n)/(2σ²) for α-weighted and m/(2σ²) otherwise.
  std::optional<double> gamma;
  /// Defaults to m/(m+n).
  std::optional<double> alpha;
  PosteriorMode mode = PosteriorMode::Exact;
  /// Chain settings for PosteriorMode::SGLD; gamma and seed are filled in.
  SgldConfig sgld;
  /// Fresh target draws per L_P evaluation when no closed form exists.
  int inner_samples = 1000;
  int threads = 0;
};

/// E[L_P(W) − L_E(W, D_t)] over data and posterior draws for the Gaussian
/// world. Exact mode simulates the sufficient statistics directly.
GenEstimate estimate_gen(GibbsAlgorithm algorithm, const GaussianMeanWorld& world, int m, int n,
                         std::uint64_t trials, std::uint64_t seed, const GenOptions& options = {});

/// A transfer problem given by a loss and two samplers.
struct TransferProblem {
  const LossFunction* loss = nullptr;
  const SampleDistribution* source = nullptr;
  const SampleDistribution* target = nullptr;
  GaussianPrior prior;
  /// Needed for TwoStageGibbs; the stage-two prior is the matching block.
  std::optional<Split> split;
  StageOneMode stage1 = StageOneMode::Erm;
  /// Closed-form target population risk; nested Monte Carlo when empty.
  std::function<double(VecRef)> population_risk;
};

/// Generic path: draws full datasets, samples W exactly (quadratic losses)
/// or by SGLD, and averages L_P − L_E over the kept samples of each trial.
/// options.gamma defaults to 1.
GenEstimate estimate_gen(GibbsAlgorithm algorithm, const TransferProblem& problem, int m, int n,
                         std::uint64_t trials, std::uint64_t seed, const GenOptions& options = {});

/// Gaussian world as a TransferProblem with squared loss. The returned
/// problem points into `storage`.
struct WorldProblemStorage {
  SquaredLoss loss;
  IsotropicGaussian source{Vector::Zero(1), 1.0};
  IsotropicGaussian target{Vector::Zero(1), 1.0};
};
TransferProblem world_problem(const GaussianMeanWorld& world, WorldProblemStorage& storage);

/// One identity check: lhs vs rhs with z = |lhs − rhs|/std_error.
struct ValidationResult {
  std::string test;
  double lhs = 0.0;
  double rhs = 0.0;
  double z = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  NamedValues params;
};

double z_score(double lhs, double rhs, double std_error);

/// gen by Monte Carlo vs I_SKL/(γα).
ValidationResult validate_theorem1(const GaussianMeanWorld& world, int m, int n,
                                   std::uint64_t trials, std::uint64_t seed, int threads = 0);
/// Two-stage gen by Monte Carlo vs I_SKL(D_t; W_c | W_φ)/γ.
ValidationResult validate_theorem2(const GaussianMeanWorld& world, int m, int n,
                                   std::uint64_t trials, std::uint64_t seed, int threads = 0);
/// α·gen on the target plus (1−α)·gen on the source vs the joint
/// I_SKL(W; D_t, D_s)/γ from the stacked channel.
ValidationResult validate_prop3(const GaussianMeanWorld& world, int m, int n,
                                std::uint64_t trials, std::uint64_t seed, int threads = 0);
/// Mean D_SKL between data and population posteriors vs γα·gen.
ValidationResult validate_theorem6(const GaussianMeanWorld& world, int m, int n,
                                   std::uint64_t trials, std::uint64_t seed, int threads = 0);
/// Two-stage form: mean D_SKL vs γ·gen.
ValidationResult validate_theorem7(const GaussianMeanWorld& world, int m, int n,
                                   std::uint64_t trials, std::uint64_t seed, int threads = 0);

/// E‖W − μ_t‖² = L_P(W) − L_P(μ_t) under the α-weighted or two-stage
/// posterior (stage one Gibbs-sampled).
McEstimate excess_risk_mc(GibbsAlgorithm algorithm, const GaussianMeanWorld& world, int m, int n,
                          std::uint64_t trials, std::uint64_t seed, int threads = 0);

struct BoundCheck {
  std::string label;
  std::string regime;
  double bound = 0.0;
  bool certified = false;
  double gen_mc = 0.0;
  double std_error = 0.0;
  /// bound ≥ gen_mc − 3·std_error, or the bound is not certified.
  bool holds = true;
};

/// Every certified bound at (m, n) against a Monte Carlo gen estimate.
std::vector<BoundCheck> bounds_vs_gen(GibbsAlgorithm algorithm, const GaussianMeanWorld& world,
                                      int m, int n, std::uint64_t trials, std::uint64_t seed,
                                      int threads = 0);

}  // namespace gibbslab
