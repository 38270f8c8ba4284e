#include "gibbslab/asymptotics.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace gibbslab {

namespace {

constexpr std::uint64_t kStreamSurrogate = 9;
constexpr std::uint64_t kStreamProp1 = 10;
constexpr std::uint64_t kStreamProp2 = 11;
constexpr std::uint64_t kStreamFisher = 12;
constexpr std::uint64_t kStreamExcess = 14;
constexpr std::uint64_t kStreamMleGen = 15;
constexpr std::uint64_t kStreamNormalityFixed = 99;
constexpr std::uint64_t kStreamNormality = 100;

McEstimate to_estimate(const RunningStats& s) {
  return {s.mean(), s.std_error(), s.count()};
}

Matrix sample_covariance(const Matrix& cols) {
  const Eigen::Index k = cols.cols();
  if (k < 2) return Matrix::Zero(cols.rows(), cols.rows());
  const Vector mean = cols.rowwise().mean();
  const Matrix centered = cols.colwise() - mean;
  return centered * centered.transpose() / static_cast<double>(k - 1);
}

/// One column per trial; trial(rng, out) fills column `out`.
template <class Fn>
Matrix collect_columns(std::uint64_t trials, std::uint64_t seed, std::uint64_t stream, int dim,
                       Fn&& trial, int threads) {
  Matrix out(dim, static_cast<Eigen::Index>(trials));
  const std::uint64_t chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  parallel_chunks(chunks, threads, [&](std::uint64_t c) {
    Rng rng = make_stream(seed, stream, c);
    const std::uint64_t end = std::min(trials, (c + 1) * kTrialsPerChunk);
    for (std::uint64_t t = c * kTrialsPerChunk; t < end; ++t) {
      Eigen::Ref<Vector> col = out.col(static_cast<Eigen::Index>(t));
      trial(rng, col);
    }
  });
  return out;
}

void check_trials(std::uint64_t trials, std::uint64_t minimum = 2) {
  require(trials >= minimum, ErrorCode::kInsufficientTrials,
          fmt::format("need at least {} trials, got {}", minimum, trials));
}

void check_same_dim(const SampleDistribution& ps, const SampleDistribution& pt, int d) {
  require(ps.dim() == d && pt.dim() == d, ErrorCode::kDimMismatch,
          fmt::format("samplers have dims {} and {}, expected {}", ps.dim(), pt.dim(), d));
}

/// Throws singular-hessian unless `m` is symmetric positive definite with a
/// sane condition number.
Eigen::LDLT<Matrix> spd_factor(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
  require(hi > 0.0 && lo > 1e-12 * hi, ErrorCode::kSingularHessian,
          fmt::format("{} is singular or indefinite (eigenvalues in [{:.3g}, {:.3g}])", what, lo,
                      hi));
  return m.ldlt();
}

/// Max entrywise |a − b| relative to max|b|; 0 when both vanish.
double relative_deviation(const Matrix& emp, const Matrix& pred) {
  const double scale = pred.cwiseAbs().maxCoeff();
  const double diff = (emp - pred).cwiseAbs().maxCoeff();
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

double mean_neg_log_lik(const ParametricFamily& f, const Matrix& z, VecRef w) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) s -= f.log_density(z.col(j), w);
  return s / static_cast<double>(z.cols());
}

/// Exact or Monte Carlo (J, I) of a task at w.
ParametricFamily::Curvature curvature(const ParametricFamily& f, const SampleDistribution& p,
                                      VecRef w, std::uint64_t draws, std::uint64_t seed,
                                      std::uint64_t substream, bool force_mc) {
  if (!force_mc) {
    if (auto exact = f.exact_curvature(p, w)) return *exact;
  }
  require(draws >= 2, ErrorCode::kInsufficientTrials, "curvature needs at least 2 draws");
  const int d = f.dim();
  Rng rng = make_stream(seed, kStreamFisher, substream);
  Matrix J = Matrix::Zero(d, d);
  Matrix scores(d, static_cast<Eigen::Index>(draws));
  Vector z(p.dim());
  for (std::uint64_t k = 0; k < draws; ++k) {
    p.draw(rng, z);
    J -= f.hessian(z, w);
    scores.col(static_cast<Eigen::Index>(k)) = f.score(z, w);
  }
  J /= static_cast<double>(draws);
  Matrix I = sample_covariance(scores);
  return {0.5 * (J + J.transpose()), 0.5 * (I + I.transpose())};
}

/// Population risk of a loss under p: closed form for quadratic losses with
/// known moments, else an average over the supplied surrogate sample.
struct PopulationMinimizer {
  std::optional<Vector> mean;
  std::optional<Dataset> surrogate;
};

PopulationMinimizer population_for(const LossFunction& loss, const SampleDistribution& p,
                                   std::uint64_t seed, int surrogate_size) {
  PopulationMinimizer out;
  if (loss.quadratic_form()) {
    if (auto mom = p.moments()) {
      out.mean = mom->mean;
      return out;
    }
  }
  Rng rng = make_stream(seed, kStreamSurrogate, 0);
  out.surrogate.emplace(p.draw_matrix(rng, surrogate_size), Role::Target);
  return out;
}

}  // namespace

std::optional<Vector> ParametricFamily::closed_form_minimizer(const std::vector<Component>&,
                                                              const Vector&, int) const {
  return std::nullopt;
}

std::optional<double> ParametricFamily::expected_neg_log_density(const SampleDistribution&,
                                                                 VecRef) const {
  return std::nullopt;
}

std::optional<ParametricFamily::Curvature> ParametricFamily::exact_curvature(
    const SampleDistribution&, VecRef) const {
  return std::nullopt;
}

GaussianLocationFamily::GaussianLocationFamily(int dim) : dim_(dim) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "family dimension must be >= 1");
}

double GaussianLocationFamily::log_density(VecRef z, VecRef w) const {
  return -0.5 * (z - w).squaredNorm() - 0.5 * dim_ * std::log(2.0 * std::numbers::pi);
}

Vector GaussianLocationFamily::score(VecRef z, VecRef w) const { return z - w; }

Matrix GaussianLocationFamily::hessian(VecRef, VecRef) const {
  return -Matrix::Identity(dim_, dim_);
}

std::optional<Vector> GaussianLocationFamily::closed_form_minimizer(
    const std::vector<Component>& parts, const Vector& fixed, int free_begin) const {
  const int len = dim_ - free_begin;
  Vector acc = Vector::Zero(len);
  double total = 0.0;
  for (const auto& c : parts) {
    if (c.weight == 0.0) continue;
    if (c.samples) {
      if (c.samples->cols() == 0) return std::nullopt;
      acc += c.weight * c.samples->bottomRows(len).rowwise().mean();
    } else {
      auto mom = c.dist->moments();
      if (!mom) return std::nullopt;
      acc += c.weight * mom->mean.tail(len);
    }
    total += c.weight;
  }
  if (total <= 0.0) return std::nullopt;
  Vector w = fixed;
  w.tail(len) = acc / total;
  return w;
}

std::optional<double> GaussianLocationFamily::expected_neg_log_density(const SampleDistribution& p,
                                                                       VecRef w) const {
  auto mom = p.moments();
  if (!mom) return std::nullopt;
  return 0.5 * ((w - mom->mean).squaredNorm() + mom->covariance.trace()) +
         0.5 * dim_ * std::log(2.0 * std::numbers::pi);
}

std::optional<ParametricFamily::Curvature> GaussianLocationFamily::exact_curvature(
    const SampleDistribution& p, VecRef) const {
  auto mom = p.moments();
  if (!mom) return std::nullopt;
  return Curvature{Matrix::Identity(dim_, dim_), mom->covariance};
}

Vector minimize_neg_log_lik(const ParametricFamily& family, const std::vector<Component>& parts,
                            const Vector& init, int free_begin, const MinimizerOptions& options) {
  const int d = family.dim();
  require(init.size() == d, ErrorCode::kDimMismatch,
          fmt::format("init has dim {}, family has {}", init.size(), d));
  require(free_begin >= 0 && free_begin < d, ErrorCode::kInvalidArgument,
          fmt::format("free block start {} outside [0, {})", free_begin, d));
  for (const auto& c : parts) {
    require((c.dist != nullptr) != (c.samples != nullptr), ErrorCode::kInvalidArgument,
            "component needs exactly one of a distribution or a sample");
    require(c.weight >= 0.0, ErrorCode::kInvalidArgument, "component weights must be >= 0");
    if (c.samples && c.weight > 0.0)
      require(c.samples->cols() > 0, ErrorCode::kEmptyDataset, "empty component sample");
  }
  if (auto w = family.closed_form_minimizer(parts, init, free_begin)) return *w;

  std::vector<std::pair<double, Matrix>> owned;
  std::vector<std::pair<double, const Matrix*>> blocks;
  owned.reserve(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& c = parts[k];
    if (c.weight == 0.0) continue;
    if (c.samples) {
      blocks.emplace_back(c.weight, c.samples);
    } else {
      Rng rng = make_stream(options.seed, kStreamSurrogate, k + 1);
      owned.emplace_back(c.weight, c.dist->draw_matrix(rng, options.surrogate_size));
      blocks.emplace_back(c.weight, &owned.back().second);
    }
  }
  require(!blocks.empty(), ErrorCode::kInvalidArgument, "objective has no weighted component");

  const int len = d - free_begin;
  auto value = [&](const Vector& w) {
    double v = 0.0;
    for (const auto& [wt, z] : blocks) v += wt * mean_neg_log_lik(family, *z, w);
    return v;
  };
  Vector w = init;
  double f = value(w);
  double gnorm = 0.0;
  for (int it = 0; it < options.max_iter; ++it) {
    Vector g = Vector::Zero(len);
    Matrix H = Matrix::Zero(len, len);
    for (const auto& [wt, z] : blocks) {
      const double scale = wt / static_cast<double>(z->cols());
      for (Eigen::Index j = 0; j < z->cols(); ++j) {
        g -= scale * family.score(z->col(j), w).tail(len);
        H -= scale * family.hessian(z->col(j), w).bottomRightCorner(len, len);
      }
    }
    gnorm = g.norm();
    if (gnorm <= options.tol) return w;
    Vector step;
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0)
      step = -ldlt.solve(g);
    else
      step = -g;
    const double slope = g.dot(step);
    double t = 1.0;
    Vector next = w;
    double fn = f;
    while (t > 1e-12) {
      next.tail(len) = w.tail(len) + t * step;
      fn = value(next);
      if (fn <= f + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (t <= 1e-12) break;
    const double moved = (next - w).norm();
    w = next;
    f = fn;
    if (moved <= 1e-15 * (1.0 + w.norm())) return w;
  }
  throw NoConvergence(fmt::format("negative log-likelihood minimization stalled (|grad| = {:.3g})",
                                  gnorm),
                      w, gnorm);
}

FisherBundle fisher_bundle(const ParametricFamily& family, const SampleDistribution& ps,
                           const SampleDistribution& pt, VecRef w, int n, int m,
                           std::uint64_t mc_draws, std::uint64_t seed, bool force_mc) {
  const int d = family.dim();
  require(w.size() == d, ErrorCode::kDimMismatch, "evaluation point has wrong dimension");
  require(ps.dim() == family.data_dim() && pt.dim() == family.data_dim(), ErrorCode::kDimMismatch,
          "sampler dimension differs from the family's data dimension");
  require(n >= 0 && m >= 0 && n + m > 0, ErrorCode::kInvalidArgument,
          fmt::format("need n, m >= 0 with n + m > 0 (got n={}, m={})", n, m));
  FisherBundle b;
  b.n = n;
  b.m = m;
  const auto cs = curvature(family, ps, w, mc_draws, seed, 0, force_mc);
  const auto ct = curvature(family, pt, w, mc_draws, seed, 1, force_mc);
  b.exact = !force_mc && family.exact_curvature(ps, w) && family.exact_curvature(pt, w);
  b.J_s = cs.J;
  b.I_s = cs.I;
  b.J_t = ct.J;
  b.I_t = ct.I;
  const double ws = static_cast<double>(n) / (n + m);
  const double wt = static_cast<double>(m) / (n + m);
  b.J_bar = ws * b.J_s + wt * b.J_t;
  b.I_bar = ws * b.I_s + wt * b.I_t;
  return b;
}

std::string_view to_string(MleVariant v) {
  return v == MleVariant::AppendixIt ? "appendix-It" : "main-text-Ibar";
}

double gen_alpha_mle(const FisherBundle& bundle, int n, int m, MleVariant variant) {
  require(n >= 0 && m >= 1, ErrorCode::kInvalidArgument,
          fmt::format("need n >= 0 and m >= 1 (got n={}, m={})", n, m));
  const auto ldlt = spd_factor(bundle.J_bar, "J_bar");
  const Matrix& I = variant == MleVariant::AppendixIt ? bundle.I_t : bundle.I_bar;
  return ldlt.solve(I).trace() / (n + m);
}

double gen_beta_mle(const ParametricFamily& family, VecRef w_phi_star, VecRef w_c_star,
                    const SampleDistribution& pt, int m, std::uint64_t mc_draws,
                    std::uint64_t seed) {
  require(m >= 1, ErrorCode::kInvalidArgument, "need m >= 1");
  const int dc = static_cast<int>(w_c_star.size());
  require(dc >= 1, ErrorCode::kInvalidArgument, "specific block must be nonempty");
  require(w_phi_star.size() + dc == family.dim(), ErrorCode::kDimMismatch,
          "w_phi and w_c do not add up to the family dimension");
  Vector w(family.dim());
  w << w_phi_star, w_c_star;
  const auto c = curvature(family, pt, w, mc_draws, seed, 2, false);
  const Matrix Jc = c.J.bottomRightCorner(dc, dc);
  const Matrix Ic = c.I.bottomRightCorner(dc, dc);
  return spd_factor(Jc, "J_c").solve(Ic).trace() / m;
}

void check_constant_hessian(const LossFunction& loss, int dim, std::uint64_t seed, int probes,
                            double tol) {
  require(loss.has_hessian(), ErrorCode::kHessianNotConstant,
          fmt::format("loss '{}' exposes no Hessian to check", loss.name()));
  Rng rng = make_stream(seed, kStreamProp1, ~std::uint64_t{0});
  Vector w(dim), z(dim);
  Matrix first;
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    fill_standard_normal(rng, w);
    fill_standard_normal(rng, z);
    const Matrix h = loss.hessian(2.0 * w, 2.0 * z);
    if (k == 0)
      first = h;
    else
      worst = std::max(worst, (h - first).cwiseAbs().maxCoeff());
  }
  require(worst <= tol, ErrorCode::kHessianNotConstant,
          fmt::format("loss '{}' Hessian varies by {:.3g} across probes", loss.name(), worst));
}

McEstimate prop1_gen_erm(const LossFunction& loss, const SampleDistribution& ps,
                         const SampleDistribution& pt, int m, int n, double alpha,
                         const Matrix& h_star, std::uint64_t trials, std::uint64_t seed,
                         int threads) {
  const int d = pt.dim();
  check_same_dim(ps, pt, d);
  require(m >= 1 && n >= 1, ErrorCode::kInvalidArgument,
          fmt::format("need m, n >= 1 (got m={}, n={})", m, n));
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::kAlphaRange,
          fmt::format("alpha = {} outside (0, 1]", alpha));
  require(h_star.rows() == d && h_star.cols() == d, ErrorCode::kDimMismatch,
          "H* must be d x d");
  check_trials(trials);
  check_constant_hessian(loss, d, seed);

  const auto pop = population_for(loss, pt, seed, 20000);
  const bool quadratic = loss.quadratic_form().has_value();
  const energy::AlphaWeighted e{alpha};

  auto stats = monte_carlo<1>(
      trials, seed, kStreamProp1,
      [&](Rng& rng, std::array<double, 1>& out) {
        const Matrix zs = ps.draw_matrix(rng, n);
        const Matrix zt = pt.draw_matrix(rng, m);
        Vector w_data, w_pop;
        if (quadratic) {
          const Vector zbar_s = zs.rowwise().mean();
          w_data = alpha * zt.rowwise().mean() + (1.0 - alpha) * zbar_s;
          if (pop.mean)
            w_pop = alpha * *pop.mean + (1.0 - alpha) * zbar_s;
          else
            w_pop = alpha * pop.surrogate->mean() + (1.0 - alpha) * zbar_s;
        } else {
          const Dataset ds(zs, Role::Source);
          const Dataset dt(zt, Role::Target);
          const Vector init = ds.mean();
          w_data = erm_minimize(loss, e, ds, dt, init).w;
          w_pop = erm_minimize(loss, e, ds, *pop.surrogate, init).w;
        }
        const Vector diff = w_data - w_pop;
        out[0] = diff.dot(h_star * diff) / alpha;
      },
      threads);
  return to_estimate(stats[0]);
}

McEstimate prop2_gen_erm(const LossFunction& loss, const SampleDistribution& ps,
                         const SampleDistribution& pt, const Split& split, int m, int n,
                         const Matrix& h_c_star, std::uint64_t trials, std::uint64_t seed,
                         int threads) {
  require(split.d_c >= 1 && split.d_phi >= 0, ErrorCode::kInvalidArgument,
          fmt::format("invalid split d_phi={}, d_c={}", split.d_phi, split.d_c));
  const int d = split.d_phi + split.d_c;
  check_same_dim(ps, pt, d);
  require(m >= 1 && n >= 1, ErrorCode::kInvalidArgument,
          fmt::format("need m, n >= 1 (got m={}, n={})", m, n));
  require(h_c_star.rows() == split.d_c && h_c_star.cols() == split.d_c, ErrorCode::kDimMismatch,
          "H_c* must be d_c x d_c");
  check_trials(trials);
  check_constant_hessian(loss, d, seed);

  const auto pop = population_for(loss, pt, seed, 20000);
  const bool quadratic = loss.quadratic_form().has_value();
  const int dc = split.d_c;

  auto stats = monte_carlo<1>(
      trials, seed, kStreamProp2,
      [&](Rng& rng, std::array<double, 1>& out) {
        const Matrix zs = ps.draw_matrix(rng, n);
        const Matrix zt = pt.draw_matrix(rng, m);
        Vector c_data, c_pop;
        if (quadratic) {
          // The quadratic loss separates across blocks, so stage one does
          // not move the stage-two minimizers.
          c_data = zt.bottomRows(dc).rowwise().mean();
          c_pop = pop.mean ? Vector(pop.mean->tail(dc))
                           : Vector(pop.surrogate->mean().tail(dc));
        } else {
          const Dataset ds(zs, Role::Source);
          const Dataset dt(zt, Role::Target);
          const Vector w_s = erm_minimize(loss, energy::SourceOnly{}, ds, dt, ds.mean()).w;
          const energy::StageTwo e{w_s.head(split.d_phi)};
          const Vector init = w_s.tail(dc);
          c_data = erm_minimize(loss, e, ds, dt, init).w;
          c_pop = erm_minimize(loss, e, ds, *pop.surrogate, init).w;
        }
        const Vector diff = c_data - c_pop;
        out[0] = diff.dot(h_c_star * diff);
      },
      threads);
  return to_estimate(stats[0]);
}

std::string_view to_string(MleAlgorithm a) {
  switch (a) {
    case MleAlgorithm::Supervised:
      return "supervised";
    case MleAlgorithm::AlphaWeighted:
      return "alpha-weighted";
    case MleAlgorithm::TwoStage:
      return "two-stage";
  }
  return "unknown";
}

ExcessRiskReport excess_risk_decomposition(const ParametricFamily& family,
                                           const SampleDistribution& ps,
                                           const SampleDistribution& pt, int n, int m,
                                           MleAlgorithm algorithm, std::uint64_t mc_draws,
                                           std::uint64_t seed, int d_phi, int threads) {
  const int d = family.dim();
  check_same_dim(ps, pt, family.data_dim());
  require(m >= 1, ErrorCode::kInvalidArgument, "need m >= 1");
  require(algorithm == MleAlgorithm::Supervised || n >= 1, ErrorCode::kInvalidArgument,
          "transfer algorithms need n >= 1");
  if (algorithm == MleAlgorithm::TwoStage)
    require(d_phi >= 0 && d_phi < d, ErrorCode::kInvalidArgument,
            fmt::format("d_phi = {} outside [0, {})", d_phi, d));
  check_trials(mc_draws);

  MinimizerOptions opt;
  opt.seed = seed;
  const Vector zero = Vector::Zero(d);
  ExcessRiskReport r;
  r.w_t_star = minimize_neg_log_lik(family, {{1.0, &pt, nullptr}}, zero, 0, opt);
  const double ws = static_cast<double>(n) / (n + m);
  const double wt = static_cast<double>(m) / (n + m);
  switch (algorithm) {
    case MleAlgorithm::Supervised:
      r.w_alg_star = r.w_t_star;
      break;
    case MleAlgorithm::AlphaWeighted:
      r.w_alg_star =
          minimize_neg_log_lik(family, {{ws, &ps, nullptr}, {wt, &pt, nullptr}}, zero, 0, opt);
      break;
    case MleAlgorithm::TwoStage: {
      const Vector w_s = minimize_neg_log_lik(family, {{1.0, &ps, nullptr}}, zero, 0, opt);
      r.w_alg_star = minimize_neg_log_lik(family, {{1.0, &pt, nullptr}}, w_s, d_phi, opt);
      break;
    }
  }
  const Matrix J_t = curvature(family, pt, r.w_t_star, mc_draws, seed, 3, false).J;
  spd_factor(J_t, "J_t");
  const Vector bias = r.w_alg_star - r.w_t_star;
  r.bias_sq = bias.dot(J_t * bias);

  // Surrogate population risk for families without a closed form.
  std::optional<Matrix> surrogate;
  if (!family.expected_neg_log_density(pt, r.w_t_star)) {
    Rng rng = make_stream(seed, kStreamSurrogate, 99);
    surrogate = pt.draw_matrix(rng, opt.surrogate_size);
  }
  auto pop_risk = [&](VecRef w) {
    if (auto v = family.expected_neg_log_density(pt, w)) return *v;
    return mean_neg_log_lik(family, *surrogate, w);
  };
  const double base = pop_risk(r.w_t_star);

  const Matrix est = collect_columns(
      mc_draws, seed, kStreamExcess, d,
      [&](Rng& rng, Eigen::Ref<Vector> out) {
        const Matrix zt = pt.draw_matrix(rng, m);
        switch (algorithm) {
          case MleAlgorithm::Supervised:
            out = minimize_neg_log_lik(family, {{1.0, nullptr, &zt}}, r.w_t_star, 0, opt);
            break;
          case MleAlgorithm::AlphaWeighted: {
            const Matrix zs = ps.draw_matrix(rng, n);
            out = minimize_neg_log_lik(family, {{ws, nullptr, &zs}, {wt, nullptr, &zt}},
                                       r.w_alg_star, 0, opt);
            break;
          }
          case MleAlgorithm::TwoStage: {
            const Matrix zs = ps.draw_matrix(rng, n);
            const Vector w_s =
                minimize_neg_log_lik(family, {{1.0, nullptr, &zs}}, r.w_alg_star, 0, opt);
            out = minimize_neg_log_lik(family, {{1.0, nullptr, &zt}}, w_s, d_phi, opt);
            break;
          }
        }
      },
      threads);

  r.variance = (J_t * sample_covariance(est)).trace();
  r.total = 0.5 * r.bias_sq + 0.5 * r.variance;
  RunningStats gap;
  for (Eigen::Index k = 0; k < est.cols(); ++k) gap.add(pop_risk(est.col(k)) - base);
  r.empirical_excess = gap.mean();
  r.empirical_std_error = gap.std_error();
  return r;
}

McEstimate mle_gen_empirical(const ParametricFamily& family, const SampleDistribution& ps,
                             const SampleDistribution& pt, int n, int m, std::uint64_t trials,
                             std::uint64_t seed, MleAlgorithm algorithm, int d_phi, int threads) {
  const int d = family.dim();
  check_same_dim(ps, pt, family.data_dim());
  require(m >= 1, ErrorCode::kInvalidArgument, "need m >= 1");
  require(algorithm == MleAlgorithm::Supervised || n >= 1, ErrorCode::kInvalidArgument,
          "transfer algorithms need n >= 1");
  if (algorithm == MleAlgorithm::TwoStage)
    require(d_phi >= 0 && d_phi < d, ErrorCode::kInvalidArgument,
            fmt::format("d_phi = {} outside [0, {})", d_phi, d));
  check_trials(trials);
  const double alpha = static_cast<double>(m) / (n + m);

  MinimizerOptions opt;
  opt.seed = seed;
  const Vector zero = Vector::Zero(d);
  const bool exact_risk = family.expected_neg_log_density(pt, zero).has_value();
  Matrix surrogate;
  if (!exact_risk || !family.closed_form_minimizer({{1.0, &pt, nullptr}}, zero, 0)) {
    Rng rng = make_stream(seed, kStreamSurrogate, 98);
    surrogate = pt.draw_matrix(rng, opt.surrogate_size);
  }
  auto pop_risk = [&](VecRef w) {
    if (exact_risk) return *family.expected_neg_log_density(pt, w);
    return mean_neg_log_lik(family, surrogate, w);
  };
  // Population target term: the exact law when the family has a closed
  // form, else the surrogate sample.
  auto target_part = [&](double weight) {
    return surrogate.size() == 0 ? Component{weight, &pt, nullptr}
                                 : Component{weight, nullptr, &surrogate};
  };
  const Vector w_t_star = minimize_neg_log_lik(family, {target_part(1.0)}, zero, 0, opt);

  auto stats = monte_carlo<1>(
      trials, seed, kStreamMleGen,
      [&](Rng& rng, std::array<double, 1>& out) {
        const Matrix zs = algorithm == MleAlgorithm::Supervised ? Matrix(d, 0)
                                                                : ps.draw_matrix(rng, n);
        const Matrix zt = pt.draw_matrix(rng, m);
        Vector w_hat, w_cv;
        switch (algorithm) {
          case MleAlgorithm::Supervised:
            w_hat = minimize_neg_log_lik(family, {{1.0, nullptr, &zt}}, w_t_star, 0, opt);
            w_cv = w_t_star;
            break;
          case MleAlgorithm::AlphaWeighted:
            w_hat = minimize_neg_log_lik(
                family, {{1.0 - alpha, nullptr, &zs}, {alpha, nullptr, &zt}}, w_t_star, 0, opt);
            w_cv = minimize_neg_log_lik(family, {{1.0 - alpha, nullptr, &zs}, target_part(alpha)},
                                        w_t_star, 0, opt);
            break;
          case MleAlgorithm::TwoStage: {
            const Vector w_s =
                minimize_neg_log_lik(family, {{1.0, nullptr, &zs}}, w_t_star, 0, opt);
            w_hat = minimize_neg_log_lik(family, {{1.0, nullptr, &zt}}, w_s, d_phi, opt);
            w_cv = minimize_neg_log_lik(family, {target_part(1.0)}, w_s, d_phi, opt);
            break;
          }
        }
        // w_cv does not depend on D_t, so its gap has mean zero.
        const double gap = pop_risk(w_hat) - mean_neg_log_lik(family, zt, w_hat);
        const double cv = pop_risk(w_cv) - mean_neg_log_lik(family, zt, w_cv);
        out[0] = gap - cv;
      },
      threads);
  return to_estimate(stats[0]);
}

std::vector<NormalityRow> asymptotic_normality_check(const ParametricFamily& family,
                                                     const SampleDistribution& ps,
                                                     const SampleDistribution& pt,
                                                     const std::vector<int>& n_grid,
                                                     const std::vector<int>& m_grid,
                                                     std::uint64_t trials, std::uint64_t seed,
                                                     int d_phi, int threads) {
  const int d = family.dim();
  check_same_dim(ps, pt, family.data_dim());
  require(!n_grid.empty() && !m_grid.empty(), ErrorCode::kInvalidArgument, "empty (n, m) grid");
  require(d_phi >= 0 && d_phi < d, ErrorCode::kInvalidArgument,
          fmt::format("d_phi = {} outside [0, {})", d_phi, d));
  check_trials(trials);
  const int dc = d - d_phi;
  MinimizerOptions opt;
  opt.seed = seed;
  const Vector zero = Vector::Zero(d);

  std::vector<NormalityRow> rows;
  std::uint64_t point = 0;
  for (int n : n_grid) {
    for (int m : m_grid) {
      require(n >= 1 && m >= 1, ErrorCode::kInvalidArgument,
              fmt::format("grid point n={}, m={} needs both >= 1", n, m));
      const double alpha = static_cast<double>(m) / (n + m);
      Rng fixed_rng = make_stream(seed, kStreamNormalityFixed, point);
      const Matrix ds = ps.draw_matrix(fixed_rng, n);

      // α-weighted: J̃ = αJ_t + (1−α)·∇²L_E(d_s), evaluated at Ŵ_α(d_s).
      const Vector w_pop =
          minimize_neg_log_lik(family, {{1.0 - alpha, nullptr, &ds}, {alpha, &pt, nullptr}},
                               zero, 0, opt);
      const auto ct = curvature(family, pt, w_pop, 20000, seed, 10 + point, false);
      Matrix hess_ds = Matrix::Zero(d, d);
      for (Eigen::Index j = 0; j < ds.cols(); ++j) hess_ds -= family.hessian(ds.col(j), w_pop);
      hess_ds /= static_cast<double>(ds.cols());
      const Matrix J_tilde = alpha * ct.J + (1.0 - alpha) * hess_ds;
      const auto jt_ldlt = spd_factor(J_tilde, "J_tilde");
      const Matrix jinv = jt_ldlt.solve(Matrix::Identity(d, d));
      const Matrix pred_alpha = alpha * alpha * jinv * ct.I * jinv;

      // Two-stage: ŵ_φ from d_s, then the c-block around ŵ_c(ŵ_φ).
      const Vector w_s = minimize_neg_log_lik(family, {{1.0, nullptr, &ds}}, zero, 0, opt);
      const Vector w_c_pop = minimize_neg_log_lik(family, {{1.0, &pt, nullptr}}, w_s, d_phi, opt);
      const auto cc = curvature(family, pt, w_c_pop, 20000, seed, 5000 + point, false);
      const Matrix Jc = cc.J.bottomRightCorner(dc, dc);
      const Matrix jcinv = spd_factor(Jc, "J_c").solve(Matrix::Identity(dc, dc));
      const Matrix pred_beta = jcinv * cc.I.bottomRightCorner(dc, dc) * jcinv;

      const double root_m = std::sqrt(static_cast<double>(m));
      const Matrix draws = collect_columns(
          trials, seed, kStreamNormality + point, d + dc,
          [&](Rng& rng, Eigen::Ref<Vector> out) {
            const Matrix zt = pt.draw_matrix(rng, m);
            const Vector wa = minimize_neg_log_lik(
                family, {{1.0 - alpha, nullptr, &ds}, {alpha, nullptr, &zt}}, w_pop, 0, opt);
            const Vector wc =
                minimize_neg_log_lik(family, {{1.0, nullptr, &zt}}, w_c_pop, d_phi, opt);
            out.head(d) = root_m * (wa - w_pop);
            out.tail(dc) = root_m * (wc - w_c_pop).tail(dc);
          },
          threads);
      const Matrix cov_alpha = sample_covariance(draws.topRows(d));
      const Matrix cov_beta = sample_covariance(draws.bottomRows(dc));

      NormalityRow row;
      row.n = n;
      row.m = m;
      row.alpha_deviation = relative_deviation(cov_alpha, pred_alpha);
      row.beta_deviation = relative_deviation(cov_beta, pred_beta);
      row.alpha_trace_empirical = cov_alpha.trace();
      row.alpha_trace_predicted = pred_alpha.trace();
      row.beta_trace_empirical = cov_beta.trace();
      row.beta_trace_predicted = pred_beta.trace();
      rows.push_back(row);
      ++point;
    }
  }
  return rows;
}

}  // namespace gibbslab
