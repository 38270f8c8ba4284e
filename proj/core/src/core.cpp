#include "gibbslab/core.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace gibbslab {

namespace {

void check_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    fail(ErrorCode::kDimMismatch, fmt::format("{}: dimension {} != {}", what, got, want));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(ErrorCode::kAlphaRange, fmt::format("alpha must lie in (0, 1), got {}", alpha));
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view to_string(Role role) { return role == Role::Source ? "source" : "target"; }

Dataset::Dataset(Matrix samples, Role role) : samples_(std::move(samples)), role_(role) {
  require(samples_.rows() >= 1, ErrorCode::kInvalidArgument, "sample dimension must be >= 1");
}

Dataset Dataset::from_rows(const std::vector<Vector>& rows, Role role, int dim) {
  if (rows.empty()) {
    require(dim >= 1, ErrorCode::kInvalidArgument, "empty dataset needs an explicit dimension");
    return empty(dim, role);
  }
  const auto d = rows.front().size();
  if (dim >= 1) check_dim(d, dim, "dataset row");
  Matrix m(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    check_dim(rows[j].size(), d, "dataset row");
    m.col(static_cast<Eigen::Index>(j)) = rows[j];
  }
  return Dataset(std::move(m), role);
}

Dataset Dataset::empty(int dim, Role role) { return Dataset(Matrix(dim, 0), role); }

Vector Dataset::sum() const { return samples_.rowwise().sum(); }

Vector Dataset::mean() const {
  require(!is_empty(), ErrorCode::kEmptyDataset, "mean of an empty dataset");
  return sum() / static_cast<double>(count());
}

Dataset Dataset::block(int start, int len) const {
  require(start >= 0 && len >= 1 && start + len <= dim(), ErrorCode::kDimMismatch,
          fmt::format("block [{}, {}) outside dimension {}", start, start + len, dim()));
  return Dataset(samples_.middleRows(start, len), role_);
}

Hypothesis::Hypothesis(Vector w_, std::optional<Split> s) : w(std::move(w_)), split(s) {
  if (split) {
    require(split->d_phi >= 0 && split->d_c >= 1, ErrorCode::kInvalidArgument,
            "split needs d_phi >= 0 and d_c >= 1");
    check_dim(split->d_phi + split->d_c, w.size(), "hypothesis split");
  }
}

Vector Hypothesis::shared() const {
  require(split.has_value(), ErrorCode::kInvalidArgument, "hypothesis has no split");
  return w.head(split->d_phi);
}

Vector Hypothesis::specific() const {
  require(split.has_value(), ErrorCode::kInvalidArgument, "hypothesis has no split");
  return w.tail(split->d_c);
}

Hypothesis Hypothesis::concat(const Vector& w_phi, const Vector& w_c) {
  Vector w(w_phi.size() + w_c.size());
  w << w_phi, w_c;
  return Hypothesis(std::move(w),
                    Split{static_cast<int>(w_phi.size()), static_cast<int>(w_c.size())});
}

Vector LossFunction::gradient(VecRef, VecRef) const {
  fail(ErrorCode::kNoGradient, fmt::format("loss '{}' provides no gradient", name()));
}

Matrix LossFunction::hessian(VecRef, VecRef) const {
  fail(ErrorCode::kNoGradient, fmt::format("loss '{}' provides no hessian", name()));
}

double SquaredLoss::evaluate(VecRef w, VecRef z) const {
  check_dim(z.size(), w.size(), "squared loss");
  return (z - w).squaredNorm();
}

Vector SquaredLoss::gradient(VecRef w, VecRef z) const {
  check_dim(z.size(), w.size(), "squared loss");
  return 2.0 * (w - z);
}

Matrix SquaredLoss::hessian(VecRef w, VecRef) const {
  return 2.0 * Matrix::Identity(w.size(), w.size());
}

GaussianLogLoss::GaussianLogLoss(int dim)
    : dim_(dim), offset_(0.5 * dim * std::log(2.0 * std::numbers::pi)) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "log-loss dimension must be >= 1");
}

double GaussianLogLoss::evaluate(VecRef w, VecRef z) const {
  check_dim(w.size(), dim_, "log-loss");
  check_dim(z.size(), dim_, "log-loss");
  return 0.5 * (z - w).squaredNorm() + offset_;
}

Vector GaussianLogLoss::gradient(VecRef w, VecRef z) const {
  check_dim(w.size(), dim_, "log-loss");
  check_dim(z.size(), dim_, "log-loss");
  return w - z;
}

Matrix GaussianLogLoss::hessian(VecRef w, VecRef) const {
  return Matrix::Identity(w.size(), w.size());
}

std::optional<QuadraticForm> GaussianLogLoss::quadratic_form() const {
  return QuadraticForm{0.5, offset_};
}

ConstantLoss::ConstantLoss(double value) : value_(value) {
  require(value >= 0.0, ErrorCode::kDomain, "constant loss must be nonnegative");
}

void GaussianPrior::validate() const {
  require(mean.size() >= 1, ErrorCode::kInvalidArgument, "prior mean is empty");
  if (!(variance > 0.0) || !std::isfinite(variance))
    fail(ErrorCode::kDomain, fmt::format("prior variance must be > 0, got {}", variance));
}

double GaussianPrior::neg_log_density(VecRef w) const {
  check_dim(w.size(), mean.size(), "prior");
  const double d = static_cast<double>(mean.size());
  return 0.5 * (w - mean).squaredNorm() / variance +
         0.5 * d * std::log(2.0 * std::numbers::pi * variance);
}

Vector GaussianPrior::neg_log_density_gradient(VecRef w) const {
  check_dim(w.size(), mean.size(), "prior");
  return (w - mean) / variance;
}

std::string energy_name(const Energy& e) {
  return std::visit(Overloaded{
                        [](const energy::TargetOnly&) { return std::string("target-only"); },
                        [](const energy::AlphaWeighted& a) {
                          return fmt::format("alpha-weighted({})", a.alpha);
                        },
                        [](const energy::SourceOnly&) { return std::string("source-only"); },
                        [](const energy::StageTwo&) { return std::string("stage-two"); },
                    },
                    e);
}

void GibbsSpec::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    fail(ErrorCode::kDomain, fmt::format("gamma must be finite and >= 0, got {}", gamma));
  prior.validate();
  if (const auto* a = std::get_if<energy::AlphaWeighted>(&energy)) check_alpha(a->alpha);
}

double empirical_risk(const LossFunction& loss, VecRef w, const Dataset& data) {
  require(!data.is_empty(), ErrorCode::kEmptyDataset, "empirical risk over an empty dataset");
  check_dim(data.dim(), w.size(), "empirical risk");
  double total = 0.0;
  for (int i = 0; i < data.count(); ++i) total += loss.evaluate(w, data.sample(i));
  return total / static_cast<double>(data.count());
}

double empirical_risk(const LossFunction& loss, const Hypothesis& w, const Dataset& data) {
  return empirical_risk(loss, w.w, data);
}

Vector empirical_risk_gradient(const LossFunction& loss, VecRef w, const Dataset& data) {
  require(!data.is_empty(), ErrorCode::kEmptyDataset, "gradient over an empty dataset");
  check_dim(data.dim(), w.size(), "empirical risk gradient");
  if (!loss.has_gradient())
    fail(ErrorCode::kNoGradient, fmt::format("loss '{}' provides no gradient", loss.name()));
  Vector g = Vector::Zero(w.size());
  for (int i = 0; i < data.count(); ++i) g += loss.gradient(w, data.sample(i));
  return g / static_cast<double>(data.count());
}

McEstimate population_risk_mc(const LossFunction& loss, VecRef w,
                              const SampleDistribution& sampler, std::uint64_t trials,
                              std::uint64_t seed, int threads) {
  if (trials < 2)
    fail(ErrorCode::kInsufficientTrials, fmt::format("need >= 2 trials, got {}", trials));
  check_dim(sampler.dim(), w.size(), "population risk");
  const Vector wv = w;
  auto stats = monte_carlo<1>(
      trials, seed, 0,
      [&](Rng& rng, std::array<double, 1>& out) {
        thread_local Vector z;
        z.resize(sampler.dim());
        sampler.draw(rng, z);
        out[0] = loss.evaluate(wv, z);
      },
      threads);
  return {stats[0].mean(), stats[0].std_error(), stats[0].count()};
}

double alpha_weighted_energy(const LossFunction& loss, VecRef w, const Dataset& ds,
                             const Dataset& dt, double alpha) {
  check_alpha(alpha);
  return (1.0 - alpha) * empirical_risk(loss, w, ds) + alpha * empirical_risk(loss, w, dt);
}

double stage_energy(const LossFunction& loss, VecRef w_phi, VecRef w_c, const Dataset& data,
                    Stage stage) {
  check_dim(w_phi.size() + w_c.size(), data.dim(), "stage energy");
  (void)stage;  // both stages are empirical risks of the concatenated parameter
  const Hypothesis h = Hypothesis::concat(w_phi, w_c);
  return empirical_risk(loss, h.w, data);
}

int energy_param_dim(const Energy& e, const Dataset& ds, const Dataset& dt) {
  return std::visit(Overloaded{
                        [&](const energy::TargetOnly&) { return dt.dim(); },
                        [&](const energy::AlphaWeighted&) {
                          check_dim(ds.dim(), dt.dim(), "source/target");
                          return dt.dim();
                        },
                        [&](const energy::SourceOnly&) { return ds.dim(); },
                        [&](const energy::StageTwo& s) {
                          const int d_c = dt.dim() - static_cast<int>(s.w_phi.size());
                          require(d_c >= 1, ErrorCode::kDimMismatch,
                                  "stage-two shared block leaves no specific coordinates");
                          return d_c;
                        },
                    },
                    e);
}

double energy_value(const LossFunction& loss, const Energy& e, VecRef w, const Dataset& ds,
                    const Dataset& dt) {
  check_dim(w.size(), energy_param_dim(e, ds, dt), "energy parameter");
  return std::visit(Overloaded{
                        [&](const energy::TargetOnly&) { return empirical_risk(loss, w, dt); },
                        [&](const energy::AlphaWeighted& a) {
                          return alpha_weighted_energy(loss, w, ds, dt, a.alpha);
                        },
                        [&](const energy::SourceOnly&) { return empirical_risk(loss, w, ds); },
                        [&](const energy::StageTwo& s) {
                          return stage_energy(loss, s.w_phi, w, dt, Stage::S2);
                        },
                    },
                    e);
}

Vector energy_gradient(const LossFunction& loss, const Energy& e, VecRef w, const Dataset& ds,
                       const Dataset& dt) {
  check_dim(w.size(), energy_param_dim(e, ds, dt), "energy parameter");
  return std::visit(
      Overloaded{
          [&](const energy::TargetOnly&) -> Vector { return empirical_risk_gradient(loss, w, dt); },
          [&](const energy::AlphaWeighted& a) -> Vector {
            check_alpha(a.alpha);
            return (1.0 - a.alpha) * empirical_risk_gradient(loss, w, ds) +
                   a.alpha * empirical_risk_gradient(loss, w, dt);
          },
          [&](const energy::SourceOnly&) -> Vector { return empirical_risk_gradient(loss, w, ds); },
          [&](const energy::StageTwo& s) -> Vector {
            const Hypothesis h = Hypothesis::concat(s.w_phi, w);
            return empirical_risk_gradient(loss, h.w, dt).tail(w.size());
          },
      },
      e);
}

}  // namespace gibbslab
