#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gibbslab/error.hpp"
#include "gibbslab/random.hpp"

namespace gibbslab {

using VecRef = Eigen::Ref<const Vector>;

enum class Role { Source, Target };

std::string_view to_string(Role role);

/// Immutable collection of d-dimensional samples stored column-wise.
class Dataset {
 public:
  Dataset(Matrix samples, Role role);
  static Dataset from_rows(const std::vector<Vector>& rows, Role role, int dim = -1);
  static Dataset empty(int dim, Role role);

  int dim() const { return static_cast<int>(samples_.rows()); }
  int count() const { return static_cast<int>(samples_.cols()); }
  bool is_empty() const { return samples_.cols() == 0; }
  Role role() const { return role_; }
  const Matrix& samples() const { return samples_; }
  Eigen::Ref<const Vector> sample(int i) const { return samples_.col(i); }

  Vector sum() const;
  /// Requires a nonempty dataset.
  Vector mean() const;
  /// Coordinates [start, start + len) of every sample.
  Dataset block(int start, int len) const;

 private:
  Matrix samples_;
  Role role_;
};

struct Split {
  int d_phi = 0;
  int d_c = 1;
};

struct Hypothesis {
  Vector w;
  std::optional<Split> split;

  Hypothesis() = default;
  explicit Hypothesis(Vector w_, std::optional<Split> s = std::nullopt);

  int dim() const { return static_cast<int>(w.size()); }
  Vector shared() const;
  Vector specific() const;
  static Hypothesis concat(const Vector& w_phi, const Vector& w_c);
};

/// ℓ(w, z) = scale·‖z − w‖² + offset.
struct QuadraticForm {
  double scale;
  double offset;
};

class LossFunction {
 public:
  virtual ~LossFunction() = default;

  virtual std::string name() const = 0;
  virtual double evaluate(VecRef w, VecRef z) const = 0;
  virtual bool has_gradient() const { return true; }
  virtual Vector gradient(VecRef w, VecRef z) const;
  virtual bool has_hessian() const { return false; }
  virtual Matrix hessian(VecRef w, VecRef z) const;
  /// Set for losses of the form scale·‖z − w‖² + offset.
  virtual std::optional<QuadraticForm> quadratic_form() const { return std::nullopt; }
};

/// ℓ(w, z) = ‖z − w‖².
class SquaredLoss final : public LossFunction {
 public:
  std::string name() const override { return "squared"; }
  double evaluate(VecRef w, VecRef z) const override;
  Vector gradient(VecRef w, VecRef z) const override;
  bool has_hessian() const override { return true; }
  Matrix hessian(VecRef w, VecRef z) const override;
  std::optional<QuadraticForm> quadratic_form() const override { return QuadraticForm{1.0, 0.0}; }
};

/// Negative log-density of N(w, I_d): ½‖z − w‖² + (d/2)·log(2π).
/// The additive constant is what keeps the loss nonnegative for d ≥ 1.
class GaussianLogLoss final : public LossFunction {
 public:
  explicit GaussianLogLoss(int dim);

  std::string name() const override { return "gaussian-log"; }
  double evaluate(VecRef w, VecRef z) const override;
  Vector gradient(VecRef w, VecRef z) const override;
  bool has_hessian() const override { return true; }
  Matrix hessian(VecRef w, VecRef z) const override;
  std::optional<QuadraticForm> quadratic_form() const override;

 private:
  int dim_;
  double offset_;
};

/// Loss with a fixed value; handy as a control in tests and examples.
class ConstantLoss final : public LossFunction {
 public:
  explicit ConstantLoss(double value);
  std::string name() const override { return "constant"; }
  double evaluate(VecRef, VecRef) const override { return value_; }
  Vector gradient(VecRef w, VecRef) const override { return Vector::Zero(w.size()); }

 private:
  double value_;
};

struct GaussianPrior {
  Vector mean;
  double variance = 1.0;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
  double neg_log_density(VecRef w) const;
  Vector neg_log_density_gradient(VecRef w) const;
};

struct GaussianPosterior {
  Vector mean;
  double variance = 1.0;

  int dim() const { return static_cast<int>(mean.size()); }
};

namespace energy {
struct TargetOnly {};
struct AlphaWeighted {
  double alpha;
};
/// Stage one of the two-stage algorithm: source empirical risk over (w_φ, w_c^s).
struct SourceOnly {};
/// Stage two: target empirical risk over w_c^t with the shared block frozen.
struct StageTwo {
  Vector w_phi;
};
}  // namespace energy

using Energy = std::variant<energy::TargetOnly, energy::AlphaWeighted, energy::SourceOnly,
                            energy::StageTwo>;

std::string energy_name(const Energy& e);

struct GibbsSpec {
  double gamma = 1.0;
  GaussianPrior prior;
  Energy energy = energy::TargetOnly{};

  void validate() const;
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
};

double empirical_risk(const LossFunction& loss, VecRef w, const Dataset& data);
double empirical_risk(const LossFunction& loss, const Hypothesis& w, const Dataset& data);
Vector empirical_risk_gradient(const LossFunction& loss, VecRef w, const Dataset& data);

McEstimate population_risk_mc(const LossFunction& loss, VecRef w,
                              const SampleDistribution& sampler, std::uint64_t trials,
                              std::uint64_t seed, int threads = 0);

double alpha_weighted_energy(const LossFunction& loss, VecRef w, const Dataset& ds,
                             const Dataset& dt, double alpha);

enum class Stage { S1, S2 };

double stage_energy(const LossFunction& loss, VecRef w_phi, VecRef w_c, const Dataset& data,
                    Stage stage);

/// Value of the energy f for the sampled parameter. For StageTwo the
/// parameter is the specific block only.
double energy_value(const LossFunction& loss, const Energy& e, VecRef w, const Dataset& ds,
                    const Dataset& dt);
Vector energy_gradient(const LossFunction& loss, const Energy& e, VecRef w, const Dataset& ds,
                       const Dataset& dt);
/// Dimension of the sampled parameter under this energy.
int energy_param_dim(const Energy& e, const Dataset& ds, const Dataset& dt);

}  // namespace gibbslab
