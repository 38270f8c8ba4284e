#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gibbslab/gaussian_world.hpp"

namespace gibbslab {

namespace tail {
struct SubGaussian {
  double sigma;
};
struct SubExponential {
  double sigma_e2;
  double b;
};
struct SubGamma {
  double sigma_s2;
  double c_s;
};
}  // namespace tail

using TailSpec = std::variant<tail::SubGaussian, tail::SubExponential, tail::SubGamma>;

void validate_tail(const TailSpec& t);
std::string tail_name(const TailSpec& t);
/// "key=value;key=value" parameter string.
std::string tail_params(const TailSpec& t);

/// CGF bound ψ(λ) for λ ≥ 0; +∞ outside the tail's domain.
double psi(const TailSpec& t, double lambda);
double psi_star_inverse(const TailSpec& t, double y);

using NamedValues = std::vector<std::pair<std::string, double>>;

struct BoundReport {
  double bound_value = 0.0;
  std::string regime;
  NamedValues inputs;
  /// Values of every branch that was evaluated, by label.
  NamedValues branches;
};

BoundReport general_mi_bound(const TailSpec& t, double mi, int m);

BoundReport dist_free_alpha_bound(double sigma_alpha, double gamma, double alpha, double c_alpha,
                                  int m);
/// The α = m/(m+n) form 2σ²γ/((1+C)(n+m)).
BoundReport dist_free_alpha_bound_remark(double sigma_alpha, double gamma, double c_alpha, int m,
                                         int n);
BoundReport dist_free_two_stage_bound(double sigma_beta, double gamma, double c_beta, int m);

struct Table2Alpha {
  double alpha;
};
struct Table2TwoStage {};
using Table2Algorithm = std::variant<Table2Alpha, Table2TwoStage>;

/// Table-2 cell. `mi` is the conditional mutual information that sets the
/// sub-Exponential branch boundary; without it both branches are reported
/// and the larger value is returned.
BoundReport table2_bound(const Table2Algorithm& algorithm, const TailSpec& t, double gamma,
                         double c, int m, std::optional<double> mi = std::nullopt);

/// Centered cumulant generating function sampled on a λ grid.
struct CgfGrid {
  std::vector<double> lambda;
  std::vector<double> value;
  /// The CGF is finite only for λ < domain_upper.
  double domain_upper = std::numeric_limits<double>::infinity();
};

/// Log-mean-exp estimate of the centered CGF of loss draws.
CgfGrid empirical_cgf(const std::vector<double>& losses, const std::vector<double>& lambdas);

/// ℓ = Σ_blocks s_i·χ²_{k_i}(‖μ_i‖²/s_i): the law of ‖Z − W‖² for
/// independent Gaussian Z and W with blockwise isotropic covariances.
class ChiSquareMixture {
 public:
  struct Block {
    int dim;
    double scale;
    double offset_sq;
  };

  explicit ChiSquareMixture(std::vector<Block> blocks);

  double mean() const;
  double variance() const;
  double max_scale() const;
  /// Centered CGF, +∞ at or beyond the pole 1/(2·max scale).
  double cgf(double lambda) const;
  double pole() const { return 0.5 / max_scale(); }
  /// Two-sided grid over |λ| ≤ fraction·pole.
  CgfGrid grid(int points, double fraction) const;
  /// Sub-Gamma certificate with v = Σ 2k s² + 4s‖μ‖², c = 2·max s.
  tail::SubGamma sub_gamma() const;
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::vector<Block> blocks_;
};

/// Loss law under P_Z^t ⊗ P_W for the α-weighted posterior at the conjugate γ and α.
ChiSquareMixture alpha_loss_law(const GaussianMeanWorld& world, int m, int n);
/// Same for the two-stage output, with W the joint marginal of (W_φ, W_c^t)
/// and a Gibbs-sampled stage one.
ChiSquareMixture two_stage_loss_law(const GaussianMeanWorld& world, int m, int n);

/// nullopt when the CGF has a finite pole or the ratio 2Λ/λ² keeps growing
/// at the edge of the grid.
std::optional<tail::SubGaussian> fit_sub_gaussian(const CgfGrid& cgf);
/// b = 1/max|λ| on the grid and σ_e² = max 2Λ(λ)/λ².
tail::SubExponential fit_sub_exponential(const CgfGrid& cgf);
/// Largest Λ(λ) − ψ(|λ|) over grid points inside ψ's domain; ≤ 0 certifies.
double certificate_violation(const TailSpec& t, const CgfGrid& cgf);

/// C = lautum/mutual for the conditional channel, so that I_SKL = (1+C)·I.
double gaussian_world_c_alpha(const GaussianMeanWorld& world, int m, int n);
double gaussian_world_c_beta(const GaussianMeanWorld& world, int m);

struct CertifiedBound {
  std::string label;
  TailSpec tail;
  BoundReport report;
  bool certified = false;
  std::string note;
};

/// Every bound that can be attached to a validated tail certificate for the
/// Gaussian-world loss. Invalid regimes are kept with certified = false.
std::vector<CertifiedBound> gaussian_world_bounds_alpha(const GaussianMeanWorld& world, int m,
                                                        int n, double c);
std::vector<CertifiedBound> gaussian_world_bounds_two_stage(const GaussianMeanWorld& world, int m,
                                                            int n, double c);

}  // namespace gibbslab
