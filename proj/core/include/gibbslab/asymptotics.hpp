#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gibbslab/core.hpp"
#include "gibbslab/samplers.hpp"

namespace gibbslab {

/// One term of an objective Σ_k weight_k · E_k[−log f(Z | w)], where E_k is
/// either a distribution or the empirical measure of a sample matrix.
struct Component {
  double weight = 1.0;
  const SampleDistribution* dist = nullptr;
  const Matrix* samples = nullptr;
};

class ParametricFamily {
 public:
  virtual ~ParametricFamily() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual int data_dim() const = 0;
  virtual double log_density(VecRef z, VecRef w) const = 0;
  /// ∇_w log f(z | w).
  virtual Vector score(VecRef z, VecRef w) const = 0;
  /// ∇²_w log f(z | w).
  virtual Matrix hessian(VecRef z, VecRef w) const = 0;

  /// Exact minimizer of the weighted objective over coordinates
  /// [free_begin, dim), others held at `fixed`; nullopt if unavailable.
  virtual std::optional<Vector> closed_form_minimizer(const std::vector<Component>& parts,
                                                      const Vector& fixed, int free_begin) const;
  /// Exact E_P[−log f(Z | w)] when available.
  virtual std::optional<double> expected_neg_log_density(const SampleDistribution& p,
                                                         VecRef w) const;
  /// Exact expected negative Hessian and centered score covariance under p.
  struct Curvature {
    Matrix J;
    Matrix I;
  };
  virtual std::optional<Curvature> exact_curvature(const SampleDistribution& p, VecRef w) const;
};

/// f(z | w) = N(w, I_d). Data may come from any law; misspecification enters
/// through the data covariance.
class GaussianLocationFamily final : public ParametricFamily {
 public:
  explicit GaussianLocationFamily(int dim);

  std::string name() const override { return "gaussian-location"; }
  int dim() const override { return dim_; }
  int data_dim() const override { return dim_; }
  double log_density(VecRef z, VecRef w) const override;
  Vector score(VecRef z, VecRef w) const override;
  Matrix hessian(VecRef z, VecRef w) const override;
  std::optional<Vector> closed_form_minimizer(const std::vector<Component>& parts,
                                              const Vector& fixed, int free_begin) const override;
  std::optional<double> expected_neg_log_density(const SampleDistribution& p,
                                                 VecRef w) const override;
  std::optional<Curvature> exact_curvature(const SampleDistribution& p, VecRef w) const override;

 private:
  int dim_;
};

/// ℓ(w, z) = −log f(z | w).
class FamilyLogLoss final : public LossFunction {
 public:
  explicit FamilyLogLoss(const ParametricFamily& family) : family_(family) {}
  std::string name() const override { return "log-loss(" + family_.name() + ")"; }
  double evaluate(VecRef w, VecRef z) const override { return -family_.log_density(z, w); }
  Vector gradient(VecRef w, VecRef z) const override { return -family_.score(z, w); }
  bool has_hessian() const override { return true; }
  Matrix hessian(VecRef w, VecRef z) const override { return -family_.hessian(z, w); }

 private:
  const ParametricFamily& family_;
};

struct MinimizerOptions {
  /// Draws used when a distribution term has no closed form.
  int surrogate_size = 20000;
  std::uint64_t seed = 0;
  double tol = 1e-10;
  int max_iter = 200;
};

/// argmin over coordinates [free_begin, dim) of Σ_k weight_k·E_k[−log f].
/// Uses the family's closed form when it has one, else damped Newton on
/// the samples (distribution terms replaced by a fixed surrogate sample).
Vector minimize_neg_log_lik(const ParametricFamily& family, const std::vector<Component>& parts,
                            const Vector& init, int free_begin = 0,
                            const MinimizerOptions& options = {});

struct FisherBundle {
  Matrix J_s, J_t, I_s, I_t, J_bar, I_bar;
  int n = 0;
  int m = 0;
  bool exact = false;
};

/// J and I of each task at w, mixed with weights n/(m+n) and m/(m+n).
/// Exact for families that expose closed forms, else Monte Carlo.
FisherBundle fisher_bundle(const ParametricFamily& family, const SampleDistribution& ps,
                           const SampleDistribution& pt, VecRef w, int n, int m,
                           std::uint64_t mc_draws, std::uint64_t seed, bool force_mc = false);

enum class MleVariant { AppendixIt, MainTextIbar };

std::string_view to_string(MleVariant v);

/// tr(I_t J̄⁻¹)/(n+m) (AppendixIt) or tr(Ī J̄⁻¹)/(n+m) (MainTextIbar).
double gen_alpha_mle(const FisherBundle& bundle, int n, int m,
                     MleVariant variant = MleVariant::AppendixIt);

/// tr(I_c^t (J_c^t)⁻¹)/m at (w_φ, w_c).
double gen_beta_mle(const ParametricFamily& family, VecRef w_phi_star, VecRef w_c_star,
                    const SampleDistribution& pt, int m, std::uint64_t mc_draws,
                    std::uint64_t seed);

/// Throws hessian-not-constant when loss Hessians vary across probe points.
void check_constant_hessian(const LossFunction& loss, int dim, std::uint64_t seed,
                            int probes = 16, double tol = 1e-6);

/// E[‖Ŵ_α(D_s,D_t) − Ŵ_α(D_s)‖²_{H*}]/α by Monte Carlo, where Ŵ_α(D_s)
/// minimizes α·L_P + (1−α)·L_E(·, D_s).
McEstimate prop1_gen_erm(const LossFunction& loss, const SampleDistribution& ps,
                         const SampleDistribution& pt, int m, int n, double alpha,
                         const Matrix& h_star, std::uint64_t trials, std::uint64_t seed,
                         int threads = 0);

/// E[‖Ŵ_c^t(D_t, W_φ) − Ŵ_c^t(W_φ)‖²_{H_c*}] with W_φ from stage-one ERM.
McEstimate prop2_gen_erm(const LossFunction& loss, const SampleDistribution& ps,
                         const SampleDistribution& pt, const Split& split, int m, int n,
                         const Matrix& h_c_star, std::uint64_t trials, std::uint64_t seed,
                         int threads = 0);

enum class MleAlgorithm { Supervised, AlphaWeighted, TwoStage };

std::string_view to_string(MleAlgorithm a);

struct ExcessRiskReport {
  double bias_sq = 0.0;
  double variance = 0.0;
  /// ½·bias_sq + ½·variance.
  double total = 0.0;
  /// Raw Monte Carlo E[L_P(Ŵ)] − L_P(w_t*), reported alongside.
  double empirical_excess = 0.0;
  double empirical_std_error = 0.0;
  Vector w_alg_star;
  Vector w_t_star;
};

ExcessRiskReport excess_risk_decomposition(const ParametricFamily& family,
                                           const SampleDistribution& ps,
                                           const SampleDistribution& pt, int n, int m,
                                           MleAlgorithm algorithm, std::uint64_t mc_draws,
                                           std::uint64_t seed, int d_phi = 0, int threads = 0);

/// Log-loss generalization error E[L_P(Ŵ) − L_E(Ŵ, D_t)] of an MLE-based
/// algorithm (α = m/(m+n) for AlphaWeighted), with a zero-mean control
/// variate from the matching estimator whose target term is the population.
McEstimate mle_gen_empirical(const ParametricFamily& family, const SampleDistribution& ps,
                             const SampleDistribution& pt, int n, int m, std::uint64_t trials,
                             std::uint64_t seed,
                             MleAlgorithm algorithm = MleAlgorithm::AlphaWeighted, int d_phi = 0,
                             int threads = 0);

struct NormalityRow {
  int n = 0;
  int m = 0;
  /// Max entrywise |Ĉ − C| / max|C| (0 when both vanish).
  double alpha_deviation = 0.0;
  double beta_deviation = 0.0;
  double alpha_trace_empirical = 0.0;
  double alpha_trace_predicted = 0.0;
  double beta_trace_empirical = 0.0;
  double beta_trace_predicted = 0.0;
};

/// Checks the limiting covariances of √m(Ŵ_α(d_s,D_t) − Ŵ_α(d_s)) and
/// √m(Ŵ_c^t(D_t, ŵ_φ) − ŵ_c^t(ŵ_φ)) for one fixed source sample per (n, m).
std::vector<NormalityRow> asymptotic_normality_check(const ParametricFamily& family,
                                                     const SampleDistribution& ps,
                                                     const SampleDistribution& pt,
                                                     const std::vector<int>& n_grid,
                                                     const std::vector<int>& m_grid,
                                                     std::uint64_t trials, std::uint64_t seed,
                                                     int d_phi = 0, int threads = 0);

}  // namespace gibbslab
