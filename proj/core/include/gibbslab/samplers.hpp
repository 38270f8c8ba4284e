#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gibbslab/core.hpp"
#include "gibbslab/gaussian_world.hpp"

namespace gibbslab {

enum class Provenance { ExactConjugate, SGLD, PriorOnly };

std::string_view to_string(Provenance p);

/// Hypotheses stored column-wise with uniform weights.
struct PosteriorSampleSet {
  Matrix samples;
  Vector weights;
  Provenance provenance = Provenance::ExactConjugate;
  std::vector<std::string> warnings;

  int count() const { return static_cast<int>(samples.cols()); }
  int dim() const { return static_cast<int>(samples.rows()); }
  Hypothesis at(int i) const { return Hypothesis(samples.col(i)); }
  Vector mean() const;
  /// Per-coordinate unbiased sample variance.
  Vector variance() const;
};

/// Thrown by erm_minimize when the iteration budget runs out.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& detail, Vector last_iterate, double grad_norm);
  const Vector& last_iterate() const { return last_; }
  double grad_norm() const { return grad_norm_; }

 private:
  Vector last_;
  double grad_norm_;
};

/// i.i.d. draws from the exact Gibbs posterior; needs a quadratic loss.
PosteriorSampleSet sample_exact_gibbs(const LossFunction& loss, const GibbsSpec& spec,
                                      const Dataset& ds, const Dataset& dt, int count,
                                      std::uint64_t seed);
/// Same, with the world's squared loss.
PosteriorSampleSet sample_exact_gibbs(const GaussianMeanWorld& world, const GibbsSpec& spec,
                                      const Dataset& ds, const Dataset& dt, int count,
                                      std::uint64_t seed);

struct SgldConfig {
  int steps = 10000;
  double step_size = 1e-3;
  double gamma = 1.0;
  int burn_in = 0;
  int thinning = 1;
  std::uint64_t seed = 0;
  /// Skip the step-size stability guard.
  bool override_stability = false;
  /// 0 means full-batch gradients; otherwise per-dataset minibatch size.
  int minibatch = 0;
  /// Starting point; defaults to the prior mean.
  std::optional<Vector> init;
  int stability_probes = 16;

  void validate() const;
  int sample_count() const;
};

/// Langevin iteration W ← W − η∇f(W) + √(2η/γ)·ζ with
/// f = energy − (1/γ)·log π, whose stationary law is π·e^{−γ·energy}.
PosteriorSampleSet sample_sgld(const LossFunction& loss, const Energy& energy, const Dataset& ds,
                               const Dataset& dt, const GaussianPrior& prior,
                               const SgldConfig& cfg);

/// Independent chains; chain i is seeded with cfg.seed + i.
std::vector<PosteriorSampleSet> sample_sgld_chains(const LossFunction& loss, const Energy& energy,
                                                   const Dataset& ds, const Dataset& dt,
                                                   const GaussianPrior& prior,
                                                   const SgldConfig& cfg, int chains,
                                                   int threads = 0);

/// Largest Hessian trace of f over probe points, or nullopt when the loss
/// has no Hessian.
std::optional<double> sgld_smoothness_estimate(const LossFunction& loss, const Energy& energy,
                                               const Dataset& ds, const Dataset& dt,
                                               const GaussianPrior& prior, double gamma,
                                               int probes, std::uint64_t seed);

/// Gradient descent with Armijo backtracking until ‖∇‖ ≤ tol.
Hypothesis erm_minimize(const LossFunction& loss, const Energy& energy, const Dataset& ds,
                        const Dataset& dt, const Vector& init, double tol = 1e-10,
                        int max_iter = 10000);

enum class StageOneMode { Erm, GibbsSample };

struct TwoStageOptions {
  StageOneMode stage1 = StageOneMode::Erm;
  /// Inverse temperature and prior over the full parameter for GibbsSample.
  double stage1_gamma = 1.0;
  std::optional<GaussianPrior> stage1_prior;
  /// Stage-two spec; its prior lives on the specific block and its energy is
  /// replaced by StageTwo with the learned shared block.
  GibbsSpec stage2;
  int count = 1;
  /// Used when the loss has no conjugate closed form.
  std::optional<SgldConfig> sgld;
};

struct TwoStageResult {
  Vector w_phi;
  Vector w_c_source;
  PosteriorSampleSet samples;
};

TwoStageResult two_stage_pipeline(const LossFunction& loss, const Dataset& ds, const Dataset& dt,
                                  const Split& split, const TwoStageOptions& options,
                                  std::uint64_t seed);

}  // namespace gibbslab
