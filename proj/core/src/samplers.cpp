#include "gibbslab/samplers.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace gibbslab {

namespace {

constexpr double kDivergenceNorm = 1e8;
constexpr std::uint64_t kSgldStream = 2;
constexpr std::uint64_t kExactStream = 3;

Matrix mean_hessian(const LossFunction& loss, VecRef w, const Dataset& data) {
  Matrix h = Matrix::Zero(w.size(), w.size());
  for (int i = 0; i < data.count(); ++i) h += loss.hessian(w, data.sample(i));
  return h / static_cast<double>(data.count());
}

Matrix energy_hessian(const LossFunction& loss, const Energy& e, VecRef w, const Dataset& ds,
                      const Dataset& dt) {
  if (std::holds_alternative<energy::TargetOnly>(e)) return mean_hessian(loss, w, dt);
  if (std::holds_alternative<energy::SourceOnly>(e)) return mean_hessian(loss, w, ds);
  if (const auto* a = std::get_if<energy::AlphaWeighted>(&e))
    return (1.0 - a->alpha) * mean_hessian(loss, w, ds) + a->alpha * mean_hessian(loss, w, dt);
  const auto& s = std::get<energy::StageTwo>(e);
  const Hypothesis h = Hypothesis::concat(s.w_phi, w);
  return mean_hessian(loss, h.w, dt).bottomRightCorner(w.size(), w.size());
}

/// Full-batch gradient of a quadratic energy: 2c·(w − z_eff).
struct QuadraticGradient {
  double two_c;
  Vector point;
};

std::optional<QuadraticGradient> quadratic_gradient(const LossFunction& loss, const Energy& e,
                                                    const Dataset& ds, const Dataset& dt,
                                                    int dim) {
  const auto q = loss.quadratic_form();
  if (!q) return std::nullopt;
  Vector point;
  if (std::holds_alternative<energy::TargetOnly>(e)) {
    point = dt.mean();
  } else if (std::holds_alternative<energy::SourceOnly>(e)) {
    point = ds.mean();
  } else if (const auto* a = std::get_if<energy::AlphaWeighted>(&e)) {
    point = (1.0 - a->alpha) * ds.mean() + a->alpha * dt.mean();
  } else {
    point = dt.mean().tail(dim);
  }
  return QuadraticGradient{2.0 * q->scale, std::move(point)};
}

Dataset subsample(const Dataset& data, int size, Rng& rng) {
  if (data.is_empty() || size >= data.count()) return data;
  std::uniform_int_distribution<int> pick(0, data.count() - 1);
  Matrix out(data.dim(), size);
  for (int j = 0; j < size; ++j) out.col(j) = data.sample(pick(rng));
  return Dataset(std::move(out), data.role());
}

PosteriorSampleSet run_chain(const LossFunction& loss, const Energy& energy, const Dataset& ds,
                             const Dataset& dt, const GaussianPrior& prior, const SgldConfig& cfg,
                             Rng rng, std::vector<std::string> warnings) {
  const int dim = energy_param_dim(energy, ds, dt);
  const auto fast = cfg.minibatch == 0 ? quadratic_gradient(loss, energy, ds, dt, dim)
                                       : std::nullopt;
  const double noise = std::sqrt(2.0 * cfg.step_size / cfg.gamma);
  const double eta = cfg.step_size;
  const double prior_coef = 1.0 / (cfg.gamma * prior.variance);

  Vector w = cfg.init ? *cfg.init : prior.mean;
  Vector grad(dim), zeta(dim);
  PosteriorSampleSet out;
  out.provenance = Provenance::SGLD;
  out.samples.resize(dim, cfg.sample_count());
  out.warnings = std::move(warnings);
  int kept = 0;
  for (int k = 1; k <= cfg.steps; ++k) {
    if (fast) {
      grad = fast->two_c * (w - fast->point);
    } else if (cfg.minibatch > 0) {
      grad = energy_gradient(loss, energy, w, subsample(ds, cfg.minibatch, rng),
                             subsample(dt, cfg.minibatch, rng));
    } else {
      grad = energy_gradient(loss, energy, w, ds, dt);
    }
    grad += prior_coef * (w - prior.mean);
    fill_standard_normal(rng, zeta);
    w -= eta * grad;
    w += noise * zeta;
    const double norm = w.norm();
    if (!(norm <= kDivergenceNorm))
      fail(ErrorCode::kSgldDiverged,
           fmt::format("iterate norm {:.3g} at step {} (eta={}, gamma={})", norm, k, eta, cfg.gamma));
    if (k > cfg.burn_in && (k - cfg.burn_in - 1) % cfg.thinning == 0) out.samples.col(kept++) = w;
  }
  out.weights = Vector::Constant(kept, 1.0 / kept);
  return out;
}

std::vector<std::string> stability_guard(const LossFunction& loss, const Energy& energy,
                                         const Dataset& ds, const Dataset& dt,
                                         const GaussianPrior& prior, const SgldConfig& cfg) {
  std::vector<std::string> warnings;
  if (cfg.override_stability) {
    warnings.emplace_back("step-size stability guard overridden");
    return warnings;
  }
  const auto smooth = sgld_smoothness_estimate(loss, energy, ds, dt, prior, cfg.gamma,
                                               cfg.stability_probes, cfg.seed);
  if (!smooth) {
    warnings.emplace_back("loss has no hessian; step-size stability not checked");
    return warnings;
  }
  if (!(cfg.step_size < 2.0 / *smooth))
    fail(ErrorCode::kSgldUnstable,
         fmt::format("step size {} >= 2/L = {:.6g} (L = {:.6g}, max hessian trace of the "
                     "energy plus prior term)",
                     cfg.step_size, 2.0 / *smooth, *smooth));
  return warnings;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::ExactConjugate: return "exact-conjugate";
    case Provenance::SGLD: return "sgld";
    case Provenance::PriorOnly: return "prior-only";
  }
  return "unknown";
}

Vector PosteriorSampleSet::mean() const {
  require(count() >= 1, ErrorCode::kEmptyDataset, "empty sample set");
  return samples.rowwise().mean();
}

Vector PosteriorSampleSet::variance() const {
  require(count() >= 2, ErrorCode::kInsufficientTrials, "variance needs >= 2 samples");
  const Matrix centered = samples.colwise() - mean();
  return centered.rowwise().squaredNorm() / static_cast<double>(count() - 1);
}

NoConvergence::NoConvergence(const std::string& detail, Vector last_iterate, double grad_norm)
    : Error(ErrorCode::kNoConvergence, detail), last_(std::move(last_iterate)),
      grad_norm_(grad_norm) {}

PosteriorSampleSet sample_exact_gibbs(const LossFunction& loss, const GibbsSpec& spec,
                                      const Dataset& ds, const Dataset& dt, int count,
                                      std::uint64_t seed) {
  require(count >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  const auto q = loss.quadratic_form();
  if (!q)
    fail(ErrorCode::kNoClosedForm,
         fmt::format("loss '{}' has no conjugate Gaussian posterior", loss.name()));
  const GaussianPosterior post = conjugate_posterior(spec, *q, ds, dt);
  Rng rng = make_stream(seed, kExactStream);
  PosteriorSampleSet out;
  out.provenance = spec.gamma == 0.0 ? Provenance::PriorOnly : Provenance::ExactConjugate;
  out.samples.resize(post.dim(), count);
  fill_standard_normal(rng, out.samples);
  out.samples = (std::sqrt(post.variance) * out.samples).colwise() + post.mean;
  out.weights = Vector::Constant(count, 1.0 / count);
  return out;
}

PosteriorSampleSet sample_exact_gibbs(const GaussianMeanWorld& world, const GibbsSpec& spec,
                                      const Dataset& ds, const Dataset& dt, int count,
                                      std::uint64_t seed) {
  world.validate();
  return sample_exact_gibbs(SquaredLoss{}, spec, ds, dt, count, seed);
}

void SgldConfig::validate() const {
  require(steps >= 1, ErrorCode::kInvalidArgument, fmt::format("steps must be >= 1, got {}", steps));
  require(burn_in >= 0 && burn_in < steps, ErrorCode::kInvalidArgument,
          fmt::format("need 0 <= burn_in < steps, got burn_in={} steps={}", burn_in, steps));
  require(thinning >= 1, ErrorCode::kInvalidArgument, "thinning must be >= 1");
  require(minibatch >= 0, ErrorCode::kInvalidArgument, "minibatch must be >= 0");
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    fail(ErrorCode::kDomain, fmt::format("step size must be > 0, got {}", step_size));
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    fail(ErrorCode::kDomain, fmt::format("SGLD gamma must be > 0, got {}", gamma));
}

int SgldConfig::sample_count() const { return (steps - burn_in + thinning - 1) / thinning; }

std::optional<double> sgld_smoothness_estimate(const LossFunction& loss, const Energy& energy,
                                               const Dataset& ds, const Dataset& dt,
                                               const GaussianPrior& prior, double gamma,
                                               int probes, std::uint64_t seed) {
  if (!loss.has_hessian()) return std::nullopt;
  const int dim = energy_param_dim(energy, ds, dt);
  Rng rng = make_stream(seed, kSgldStream, ~std::uint64_t{0});
  const double prior_term = dim / (gamma * prior.variance);
  const double spread = std::sqrt(prior.variance);
  double worst = 0.0;
  Vector w(dim);
  for (int p = 0; p < std::max(1, probes); ++p) {
    fill_standard_normal(rng, w);
    w = prior.mean + spread * w;
    worst = std::max(worst, energy_hessian(loss, energy, w, ds, dt).trace() + prior_term);
  }
  return worst;
}

PosteriorSampleSet sample_sgld(const LossFunction& loss, const Energy& energy, const Dataset& ds,
                               const Dataset& dt, const GaussianPrior& prior,
                               const SgldConfig& cfg) {
  cfg.validate();
  prior.validate();
  if (!loss.has_gradient())
    fail(ErrorCode::kNoGradient, fmt::format("loss '{}' provides no gradient", loss.name()));
  const int dim = energy_param_dim(energy, ds, dt);
  if (prior.dim() != dim)
    fail(ErrorCode::kDimMismatch, fmt::format("prior dimension {} != parameter dimension {}",
                                              prior.dim(), dim));
  if (cfg.init && cfg.init->size() != dim)
    fail(ErrorCode::kDimMismatch, "SGLD init has the wrong dimension");
  auto warnings = stability_guard(loss, energy, ds, dt, prior, cfg);
  return run_chain(loss, energy, ds, dt, prior, cfg, make_stream(cfg.seed, kSgldStream),
                   std::move(warnings));
}

std::vector<PosteriorSampleSet> sample_sgld_chains(const LossFunction& loss, const Energy& energy,
                                                   const Dataset& ds, const Dataset& dt,
                                                   const GaussianPrior& prior,
                                                   const SgldConfig& cfg, int chains,
                                                   int threads) {
  require(chains >= 1, ErrorCode::kInvalidArgument, "need at least one chain");
  cfg.validate();
  prior.validate();
  if (!loss.has_gradient())
    fail(ErrorCode::kNoGradient, fmt::format("loss '{}' provides no gradient", loss.name()));
  const auto warnings = stability_guard(loss, energy, ds, dt, prior, cfg);
  std::vector<PosteriorSampleSet> out(chains);
  parallel_chunks(static_cast<std::uint64_t>(chains), threads, [&](std::uint64_t c) {
    out[c] = run_chain(loss, energy, ds, dt, prior, cfg, make_stream(cfg.seed + c, kSgldStream),
                       warnings);
  });
  return out;
}

Hypothesis erm_minimize(const LossFunction& loss, const Energy& energy, const Dataset& ds,
                        const Dataset& dt, const Vector& init, double tol, int max_iter) {
  if (!loss.has_gradient())
    fail(ErrorCode::kNoGradient, fmt::format("loss '{}' provides no gradient", loss.name()));
  const int dim = energy_param_dim(energy, ds, dt);
  if (init.size() != dim)
    fail(ErrorCode::kDimMismatch, fmt::format("init dimension {} != {}", init.size(), dim));
  require(tol > 0.0 && max_iter >= 1, ErrorCode::kInvalidArgument, "need tol > 0, max_iter >= 1");

  Vector w = init;
  double f = energy_value(loss, energy, w, ds, dt);
  Vector g = energy_gradient(loss, energy, w, ds, dt);
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const double gnorm2 = g.squaredNorm();
    if (std::sqrt(gnorm2) <= tol) return Hypothesis(std::move(w));
    // Once the decrease is below roundoff in f, fall back to requiring a
    // smaller gradient so the search can still reach tight tolerances.
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    Vector trial, gt;
    double ft = f;
    for (;;) {
      trial = w - step * g;
      ft = energy_value(loss, energy, trial, ds, dt);
      if (std::abs(ft - f) <= slack) {
        gt = energy_gradient(loss, energy, trial, ds, dt);
        if (gt.squaredNorm() < gnorm2) break;
      } else if (ft <= f - 0.5 * step * gnorm2) {
        gt = energy_gradient(loss, energy, trial, ds, dt);
        break;
      }
      if (step <= 1e-20) {
        gt = energy_gradient(loss, energy, trial, ds, dt);
        break;
      }
      step *= 0.5;
    }
    w = std::move(trial);
    f = ft;
    g = std::move(gt);
    step = std::min(1.0, step * 2.0);
  }
  const double gnorm = g.norm();
  if (gnorm <= tol) return Hypothesis(std::move(w));
  throw NoConvergence(fmt::format("gradient norm {:.3g} > tol {:.3g} after {} iterations", gnorm,
                                  tol, max_iter),
                      w, gnorm);
}

TwoStageResult two_stage_pipeline(const LossFunction& loss, const Dataset& ds, const Dataset& dt,
                                  const Split& split, const TwoStageOptions& options,
                                  std::uint64_t seed) {
  const Hypothesis shape(Vector::Zero(split.d_phi + split.d_c), split);
  if (ds.dim() != shape.dim() || dt.dim() != shape.dim())
    fail(ErrorCode::kDimMismatch,
         fmt::format("split {}+{} does not match data dimensions {} / {}", split.d_phi,
                     split.d_c, ds.dim(), dt.dim()));
  const bool conjugate = loss.quadratic_form().has_value();
  if (!conjugate && !options.sgld)
    fail(ErrorCode::kNoClosedForm, "non-quadratic loss needs an SGLD configuration");

  TwoStageResult result;
  result.w_phi = Vector(0);
  if (split.d_phi > 0) {
    Vector stage1;
    if (options.stage1 == StageOneMode::Erm) {
      const Vector init = options.stage1_prior ? options.stage1_prior->mean
                                               : Vector(Vector::Zero(shape.dim()));
      stage1 = erm_minimize(loss, energy::SourceOnly{}, ds, dt, init).w;
    } else {
      GibbsSpec s1{options.stage1_gamma,
                   options.stage1_prior.value_or(GaussianPrior{Vector::Zero(shape.dim()), 1.0}),
                   energy::SourceOnly{}};
      if (conjugate) {
        stage1 = sample_exact_gibbs(loss, s1, ds, dt, 1, seed).samples.col(0);
      } else {
        SgldConfig cfg = *options.sgld;
        cfg.gamma = s1.gamma;
        cfg.seed = seed;
        const auto set = sample_sgld(loss, s1.energy, ds, dt, s1.prior, cfg);
        stage1 = set.samples.col(set.count() - 1);
      }
    }
    result.w_phi = stage1.head(split.d_phi);
    result.w_c_source = stage1.tail(split.d_c);
  }

  GibbsSpec s2 = options.stage2;
  s2.energy = energy::StageTwo{result.w_phi};
  if (conjugate) {
    result.samples = sample_exact_gibbs(loss, s2, ds, dt, options.count, seed + 1);
  } else {
    SgldConfig cfg = *options.sgld;
    cfg.gamma = s2.gamma;
    cfg.seed = seed + 1;
    result.samples = sample_sgld(loss, s2.energy, ds, dt, s2.prior, cfg);
  }
  return result;
}

}  // namespace gibbslab
