#include "gibbslab/gaussian_world.hpp"

#include <cmath>

#include <fmt/format.h>

namespace gibbslab {

namespace {

void check_counts(int m, int n) {
  require(m >= 0 && n >= 0, ErrorCode::kDomain, fmt::format("negative sample count m={} n={}", m, n));
  require(m + n >= 1, ErrorCode::kEmptyDataset, "m + n must be >= 1");
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    fail(ErrorCode::kDomain, fmt::format("{} must be finite and > 0, got {}", name, v));
}

void check_nonneg(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v))
    fail(ErrorCode::kDomain, fmt::format("{} must be finite and >= 0, got {}", name, v));
}

void check_len(const Vector& v, int want, const char* name) {
  if (v.size() != want)
    fail(ErrorCode::kDimMismatch, fmt::format("{} has length {}, expected {}", name, v.size(), want));
}

void check_data(const Dataset& data, int want, const char* name) {
  if (data.dim() != want)
    fail(ErrorCode::kDimMismatch, fmt::format("{} have dimension {}, expected {}", name, data.dim(), want));
}

}  // namespace

GaussianMeanWorld GaussianMeanWorld::unit(int d, int d_phi) {
  GaussianMeanWorld w;
  w.d = d;
  w.d_phi = d_phi;
  w.d_c = d - d_phi;
  w.mu_s = Vector::Zero(d);
  w.mu_t = Vector::Zero(d);
  w.mu_0 = Vector::Zero(d);
  w.validate();
  return w;
}

void GaussianMeanWorld::validate() const {
  require(d >= 1, ErrorCode::kDomain, fmt::format("d must be >= 1, got {}", d));
  require(d_phi >= 0 && d_c >= 1 && d_phi + d_c == d, ErrorCode::kDimMismatch,
          fmt::format("need d_phi >= 0, d_c >= 1, d_phi + d_c = d (got {}, {}, {})", d_phi, d_c, d));
  check_len(mu_s, d, "mu_s");
  check_len(mu_t, d, "mu_t");
  check_len(mu_0, d, "mu_0");
  if (mu_1_phi) check_len(*mu_1_phi, d_phi, "mu_1_phi");
  if (mu_2_c) check_len(*mu_2_c, d_c, "mu_2_c");
  check_nonneg(sigma_s2, "sigma_s2");
  check_nonneg(sigma_t2, "sigma_t2");
  check_positive(sigma_0_2, "sigma_0_2");
  check_positive(sigma2, "sigma2");
}

Vector GaussianMeanWorld::prior_phi() const { return mu_1_phi ? *mu_1_phi : Vector(mu_0.head(d_phi)); }
Vector GaussianMeanWorld::prior_c() const { return mu_2_c ? *mu_2_c : Vector(mu_0.tail(d_c)); }

double GaussianMeanWorld::alpha_gamma(int m, int n) const {
  check_counts(m, n);
  return (m + n) / (2.0 * sigma2);
}

double GaussianMeanWorld::alpha_weight(int m, int n) const {
  check_counts(m, n);
  return static_cast<double>(m) / (m + n);
}

double GaussianMeanWorld::stage_two_gamma(int m) const {
  require(m >= 1, ErrorCode::kEmptyDataset, "stage two needs m >= 1");
  return m / (2.0 * sigma2);
}

double GaussianMeanWorld::stage_one_gamma(int n) const {
  require(n >= 0, ErrorCode::kDomain, "negative source count");
  return n / (2.0 * sigma2);
}

double GaussianMeanWorld::sigma_1_2(int m, int n) const {
  check_counts(m, n);
  return sigma_0_2 * sigma2 / ((m + n) * sigma_0_2 + sigma2);
}

double GaussianMeanWorld::sigma_phi_2(int n) const {
  return sigma_0_2 * sigma2 / (n * sigma_0_2 + sigma2);
}

double GaussianMeanWorld::sigma_c_2(int m) const {
  return sigma_0_2 * sigma2 / (m * sigma_0_2 + sigma2);
}

double GaussianMeanWorld::target_population_risk(VecRef w) const {
  check_len(w, d, "hypothesis");
  return (w - mu_t).squaredNorm() + d * sigma_t2;
}

double GaussianMeanWorld::source_population_risk(VecRef w) const {
  check_len(w, d, "hypothesis");
  return (w - mu_s).squaredNorm() + d * sigma_s2;
}

GaussianPosterior conjugate_posterior(const GibbsSpec& spec, const QuadraticForm& loss,
                                      const Dataset& ds, const Dataset& dt) {
  spec.validate();
  const int dim = energy_param_dim(spec.energy, ds, dt);
  check_len(spec.prior.mean, dim, "prior mean");
  const double prior_precision = 1.0 / spec.prior.variance;
  if (spec.gamma == 0.0) return {spec.prior.mean, spec.prior.variance};

  // Energy c·‖z̄_eff − w‖² up to constants; the posterior precision is 1/σ₀² + 2cγ.
  const double k = 2.0 * loss.scale * spec.gamma;
  Vector target_point;
  if (std::holds_alternative<energy::TargetOnly>(spec.energy)) {
    target_point = dt.mean();
  } else if (const auto* a = std::get_if<energy::AlphaWeighted>(&spec.energy)) {
    target_point = (1.0 - a->alpha) * ds.mean() + a->alpha * dt.mean();
  } else if (std::holds_alternative<energy::SourceOnly>(spec.energy)) {
    target_point = ds.mean();
  } else {
    target_point = dt.mean().tail(dim);
  }
  const double precision = prior_precision + k;
  return {(prior_precision * spec.prior.mean + k * target_point) / precision, 1.0 / precision};
}

GaussianPosterior alpha_posterior(const GaussianMeanWorld& world, const Dataset& ds,
                                  const Dataset& dt) {
  world.validate();
  check_data(ds, world.d, "source samples");
  check_data(dt, world.d, "target samples");
  const double s1 = world.sigma_1_2(dt.count(), ds.count());
  Vector mean = (s1 / world.sigma_0_2) * world.mu_0 + (s1 / world.sigma2) * (ds.sum() + dt.sum());
  return {std::move(mean), s1};
}

GaussianPosterior alpha_population_posterior(const GaussianMeanWorld& world, const Dataset& ds,
                                             int m) {
  world.validate();
  check_data(ds, world.d, "source samples");
  const double s1 = world.sigma_1_2(m, ds.count());
  Vector mean = (s1 / world.sigma_0_2) * world.mu_0 +
                (s1 / world.sigma2) * (ds.sum() + static_cast<double>(m) * world.mu_t);
  return {std::move(mean), s1};
}

GaussianPosterior stage_one_posterior(const GaussianMeanWorld& world, const Dataset& ds) {
  world.validate();
  check_data(ds, world.d, "source samples");
  const double sp = world.sigma_phi_2(ds.count());
  if (world.d_phi == 0) return {Vector(0), sp};
  Vector mean = (sp / world.sigma_0_2) * world.prior_phi() +
                (sp / world.sigma2) * ds.sum().head(world.d_phi);
  return {std::move(mean), sp};
}

GaussianPosterior two_stage_posterior(const GaussianMeanWorld& world, VecRef w_phi,
                                      const Dataset& dt) {
  world.validate();
  check_len(w_phi, world.d_phi, "w_phi");
  check_data(dt, world.d, "target samples");
  require(!dt.is_empty(), ErrorCode::kEmptyDataset, "two-stage posterior needs target data");
  const double sc = world.sigma_c_2(dt.count());
  Vector mean = (sc / world.sigma_0_2) * world.prior_c() +
                (sc / world.sigma2) * dt.sum().tail(world.d_c);
  return {std::move(mean), sc};
}

GaussianPosterior two_stage_population_posterior(const GaussianMeanWorld& world, VecRef w_phi,
                                                 int m) {
  world.validate();
  check_len(w_phi, world.d_phi, "w_phi");
  require(m >= 1, ErrorCode::kEmptyDataset, "two-stage posterior needs m >= 1");
  const double sc = world.sigma_c_2(m);
  Vector mean = (sc / world.sigma_0_2) * world.prior_c() +
                (sc / world.sigma2) * static_cast<double>(m) * world.mu_t.tail(world.d_c);
  return {std::move(mean), sc};
}

double iskl_alpha(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  check_counts(m, n);
  return m * w.d * w.sigma_0_2 * w.sigma_t2 / (((m + n) * w.sigma_0_2 + w.sigma2) * w.sigma2);
}

double iskl_beta(const GaussianMeanWorld& w, int m) {
  w.validate();
  require(m >= 1, ErrorCode::kEmptyDataset, "m must be >= 1");
  return m * w.d_c * w.sigma_0_2 * w.sigma_t2 / ((m * w.sigma_0_2 + w.sigma2) * w.sigma2);
}

double gen_alpha_closed(const GaussianMeanWorld& w, int m, int n) {
  return gen_alpha_closed_at_gamma(w, m, n, w.alpha_gamma(m, n));
}

double gen_alpha_closed_at_gamma(const GaussianMeanWorld& w, int m, int n, double gamma) {
  w.validate();
  check_counts(m, n);
  check_positive(gamma, "gamma");
  return 2.0 * w.d * w.sigma_0_2 * w.sigma_t2 / ((m + n) * (w.sigma_0_2 + 1.0 / (2.0 * gamma)));
}

double gen_alpha_closed_weighted(const GaussianMeanWorld& w, int m, int n, double gamma,
                                 double alpha) {
  w.validate();
  check_counts(m, n);
  require(m >= 1, ErrorCode::kEmptyDataset, "m must be >= 1");
  require(gamma >= 0.0 && std::isfinite(gamma), ErrorCode::kDomain, "gamma must be finite and >= 0");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kAlphaRange, "alpha outside [0, 1]");
  if (gamma == 0.0) return 0.0;
  return 2.0 * alpha * w.d * w.sigma_0_2 * w.sigma_t2 / (m * (w.sigma_0_2 + 1.0 / (2.0 * gamma)));
}

double gen_beta_closed(const GaussianMeanWorld& w, int m) {
  const double gamma = w.stage_two_gamma(m);
  w.validate();
  return 2.0 * w.d_c * w.sigma_0_2 * w.sigma_t2 / (m * (w.sigma_0_2 + 1.0 / (2.0 * gamma)));
}

double gen_supervised_closed(const GaussianMeanWorld& w, int m) {
  const double gamma = w.stage_two_gamma(m);
  w.validate();
  return 2.0 * w.d * w.sigma_0_2 * w.sigma_t2 / (m * (w.sigma_0_2 + 1.0 / (2.0 * gamma)));
}

ExcessRiskAlpha excess_risk_alpha(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  const double s1 = w.sigma_1_2(m, n);
  const double denom = (m + n) * w.sigma_0_2 + w.sigma2;
  const Vector bias = (w.sigma2 * (w.mu_0 - w.mu_t) + n * w.sigma_0_2 * (w.mu_s - w.mu_t)) / denom;
  const double s4 = w.sigma2 * w.sigma2;
  const double variance = w.d * s1 * s1 / s4 * (n * w.sigma_s2 + m * w.sigma_t2) + w.d * s1;
  const double bias_sq = bias.squaredNorm();
  return {bias_sq, variance, bias_sq + variance};
}

ExcessRiskTwoStage excess_risk_two_stage(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  require(m >= 1 && n >= 0, ErrorCode::kDomain, "two-stage excess risk needs m >= 1, n >= 0");
  const double sp = w.sigma_phi_2(n);
  const double sc = w.sigma_c_2(m);
  const double s4 = w.sigma2 * w.sigma2;
  const Vector mu_s_phi = w.mu_s.head(w.d_phi);
  const Vector mu_t_phi = w.mu_t.head(w.d_phi);
  const Vector mu_t_c = w.mu_t.tail(w.d_c);
  const Vector bias_phi =
      (w.sigma2 * (w.prior_phi() - mu_t_phi) + n * w.sigma_0_2 * (mu_s_phi - mu_t_phi)) /
      (n * w.sigma_0_2 + w.sigma2);
  const Vector bias_c = w.sigma2 * (w.prior_c() - mu_t_c) / (m * w.sigma_0_2 + w.sigma2);
  ExcessRiskTwoStage r{};
  r.bias_sq_phi = bias_phi.squaredNorm();
  r.bias_sq_c = bias_c.squaredNorm();
  r.variance_phi = n * w.d_phi * sp * sp * w.sigma_s2 / s4 + w.d_phi * sp;
  r.variance_c = m * w.d_c * sc * sc * w.sigma_t2 / s4 + w.d_c * sc;
  r.total = r.bias_sq_phi + r.bias_sq_c + r.variance_phi + r.variance_c;
  return r;
}

}  // namespace gibbslab
