#include "gibbslab/bounds.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gibbslab/info.hpp"

namespace gibbslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    fail(ErrorCode::kDomain, fmt::format("{} must be finite and > 0, got {}", name, v));
}

void check_nonneg(double v, const char* name) {
  if (!(v >= 0.0) || std::isnan(v))
    fail(ErrorCode::kDomain, fmt::format("{} must be >= 0, got {}", name, v));
}

void check_m(int m) {
  if (m < 1) fail(ErrorCode::kDomain, fmt::format("m must be >= 1, got {}", m));
}

/// γ·α for α-weighted, γ for two-stage.
double effective_gamma(const Table2Algorithm& a, double gamma) {
  if (const auto* al = std::get_if<Table2Alpha>(&a)) {
    if (!(al->alpha > 0.0 && al->alpha < 1.0))
      fail(ErrorCode::kAlphaRange, fmt::format("alpha must lie in (0, 1), got {}", al->alpha));
    return gamma * al->alpha;
  }
  return gamma;
}

}  // namespace

void validate_tail(const TailSpec& t) {
  if (const auto* g = std::get_if<tail::SubGaussian>(&t)) {
    check_positive(g->sigma, "sigma");
  } else if (const auto* e = std::get_if<tail::SubExponential>(&t)) {
    check_positive(e->sigma_e2, "sigma_e2");
    check_positive(e->b, "b");
  } else {
    const auto& s = std::get<tail::SubGamma>(t);
    check_positive(s.sigma_s2, "sigma_s2");
    check_positive(s.c_s, "c_s");
  }
}

std::string tail_name(const TailSpec& t) {
  switch (t.index()) {
    case 0: return "sub-gaussian";
    case 1: return "sub-exponential";
    default: return "sub-gamma";
  }
}

std::string tail_params(const TailSpec& t) {
  if (const auto* g = std::get_if<tail::SubGaussian>(&t)) return fmt::format("sigma={}", g->sigma);
  if (const auto* e = std::get_if<tail::SubExponential>(&t))
    return fmt::format("sigma_e2={};b={}", e->sigma_e2, e->b);
  const auto& s = std::get<tail::SubGamma>(t);
  return fmt::format("sigma_s2={};c_s={}", s.sigma_s2, s.c_s);
}

double psi(const TailSpec& t, double lambda) {
  validate_tail(t);
  const double l = std::abs(lambda);
  if (const auto* g = std::get_if<tail::SubGaussian>(&t)) return 0.5 * g->sigma * g->sigma * l * l;
  if (const auto* e = std::get_if<tail::SubExponential>(&t))
    return l <= 1.0 / e->b ? 0.5 * e->sigma_e2 * l * l : kInf;
  const auto& s = std::get<tail::SubGamma>(t);
  return s.c_s * l < 1.0 ? l * l * s.sigma_s2 / (2.0 * (1.0 - s.c_s * l)) : kInf;
}

double psi_star_inverse(const TailSpec& t, double y) {
  validate_tail(t);
  if (!(y >= 0.0)) fail(ErrorCode::kDomain, fmt::format("psi*^-1 needs y >= 0, got {}", y));
  if (const auto* g = std::get_if<tail::SubGaussian>(&t)) return std::sqrt(2.0 * g->sigma * g->sigma * y);
  if (const auto* e = std::get_if<tail::SubExponential>(&t)) {
    // Legendre dual of σ²λ²/2 on [0, 1/b]: the quadratic branch ends where the
    // optimal λ = √(2y/σ²) reaches 1/b, i.e. at y = σ²/(2b²).
    if (y <= e->sigma_e2 / (2.0 * e->b * e->b)) return std::sqrt(2.0 * e->sigma_e2 * y);
    return e->b * y + e->sigma_e2 / (2.0 * e->b);
  }
  const auto& s = std::get<tail::SubGamma>(t);
  return std::sqrt(2.0 * s.sigma_s2 * y) + s.c_s * y;
}

BoundReport general_mi_bound(const TailSpec& t, double mi, int m) {
  check_m(m);
  check_nonneg(mi, "mutual information");
  BoundReport r;
  r.bound_value = psi_star_inverse(t, mi / m);
  r.regime = tail_name(t);
  if (const auto* e = std::get_if<tail::SubExponential>(&t))
    r.regime += mi / m <= e->sigma_e2 / (2.0 * e->b * e->b) ? ":quadratic" : ":linear";
  r.inputs = {{"mi", mi}, {"m", static_cast<double>(m)}};
  return r;
}

BoundReport dist_free_alpha_bound(double sigma_alpha, double gamma, double alpha, double c_alpha,
                                  int m) {
  check_positive(sigma_alpha, "sigma_alpha");
  check_positive(gamma, "gamma");
  check_nonneg(c_alpha, "C_alpha");
  check_m(m);
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(ErrorCode::kDomain, fmt::format("alpha must lie in (0, 1), got {}", alpha));
  BoundReport r;
  r.bound_value = std::isinf(c_alpha) ? 0.0
                                      : 2.0 * sigma_alpha * sigma_alpha * gamma * alpha /
                                            ((1.0 + c_alpha) * m);
  r.regime = "dist-free-alpha";
  r.inputs = {{"sigma_alpha", sigma_alpha}, {"gamma", gamma}, {"alpha", alpha},
              {"C_alpha", c_alpha}, {"m", static_cast<double>(m)}};
  return r;
}

BoundReport dist_free_alpha_bound_remark(double sigma_alpha, double gamma, double c_alpha, int m,
                                         int n) {
  check_positive(sigma_alpha, "sigma_alpha");
  check_positive(gamma, "gamma");
  check_nonneg(c_alpha, "C_alpha");
  check_m(m);
  if (n < 1) fail(ErrorCode::kDomain, "remark form needs n >= 1 so that alpha < 1");
  BoundReport r;
  r.bound_value = 2.0 * sigma_alpha * sigma_alpha * gamma / ((1.0 + c_alpha) * (n + m));
  r.regime = "dist-free-alpha-balanced";
  r.inputs = {{"sigma_alpha", sigma_alpha}, {"gamma", gamma}, {"C_alpha", c_alpha},
              {"m", static_cast<double>(m)}, {"n", static_cast<double>(n)}};
  return r;
}

BoundReport dist_free_two_stage_bound(double sigma_beta, double gamma, double c_beta, int m) {
  check_positive(sigma_beta, "sigma_beta");
  check_positive(gamma, "gamma");
  check_nonneg(c_beta, "C_beta");
  check_m(m);
  BoundReport r;
  r.bound_value = std::isinf(c_beta)
                      ? 0.0
                      : 2.0 * sigma_beta * sigma_beta * gamma / ((1.0 + c_beta) * m);
  r.regime = "dist-free-two-stage";
  r.inputs = {{"sigma_beta", sigma_beta}, {"gamma", gamma}, {"C_beta", c_beta},
              {"m", static_cast<double>(m)}};
  return r;
}

BoundReport table2_bound(const Table2Algorithm& algorithm, const TailSpec& t, double gamma,
                         double c, int m, std::optional<double> mi) {
  validate_tail(t);
  check_positive(gamma, "gamma");
  check_nonneg(c, "C");
  check_m(m);
  if (mi) check_nonneg(*mi, "mutual information");
  const double g = effective_gamma(algorithm, gamma);
  const bool is_alpha = std::holds_alternative<Table2Alpha>(algorithm);
  BoundReport r;
  r.inputs = {{"gamma", gamma}, {"C", c}, {"m", static_cast<double>(m)}};
  if (is_alpha) r.inputs.emplace_back("alpha", std::get<Table2Alpha>(algorithm).alpha);
  if (mi) r.inputs.emplace_back("mi", *mi);
  const double scaled_m = m * (1.0 + c);

  if (const auto* e = std::get_if<tail::SubExponential>(&t)) {
    const double threshold = std::ceil(g * e->b / (1.0 + c));
    if (!(m > threshold))
      fail(ErrorCode::kRegimeInvalid,
           fmt::format("sub-exponential bound needs m > B = ceil(gamma_eff*b/(1+C)) = {}, got m={}",
                       threshold, m));
    const double large = 2.0 * e->sigma_e2 * g / scaled_m;
    const double mid = e->sigma_e2 / (2.0 * e->b) * (g * e->b / (scaled_m - g * e->b) + 1.0);
    r.branches = {{"large-m", large}, {"mid", mid}};
    r.inputs.emplace_back("B", threshold);
    if (mi) {
      // Boundary of the quadratic branch of ψ*⁻¹: I/m ≤ σ_e²/(2b²).
      const double boundary = 2.0 * e->b * e->b * *mi / e->sigma_e2;
      r.inputs.emplace_back("I_threshold", boundary);
      if (m >= boundary) {
        r.bound_value = large;
        r.regime = "sub-exponential:large-m";
      } else {
        r.bound_value = mid;
        r.regime = "sub-exponential:mid";
      }
    } else {
      // The linear branch majorizes ψ*⁻¹ everywhere, so it is valid without I.
      r.bound_value = mid;
      r.regime = "sub-exponential:mid(I unknown)";
    }
    return r;
  }
  if (const auto* s = std::get_if<tail::SubGamma>(&t)) {
    const double threshold = g * s->c_s / (1.0 + c);
    if (!(m > threshold))
      fail(ErrorCode::kRegimeInvalid,
           fmt::format("sub-gamma bound needs m > gamma_eff*c_s/(1+C) = {:.6g}, got m={}",
                       threshold, m));
    const double denom = scaled_m - g * s->c_s;
    r.bound_value = 2.0 * s->sigma_s2 * g / denom * (1.0 + g * s->c_s / denom);
    r.regime = "sub-gamma";
    r.branches = {{"sub-gamma", r.bound_value}};
    r.inputs.emplace_back("threshold", threshold);
    return r;
  }
  fail(ErrorCode::kDomain, "table 2 covers sub-exponential and sub-gamma tails only");
}

CgfGrid empirical_cgf(const std::vector<double>& losses, const std::vector<double>& lambdas) {
  if (losses.size() < 2) fail(ErrorCode::kInsufficientTrials, "empirical CGF needs >= 2 draws");
  double mean = 0.0;
  for (double x : losses) mean += x;
  mean /= static_cast<double>(losses.size());
  CgfGrid out;
  for (double l : lambdas) {
    double peak = -kInf;
    for (double x : losses) peak = std::max(peak, l * (x - mean));
    double acc = 0.0;
    for (double x : losses) acc += std::exp(l * (x - mean) - peak);
    out.lambda.push_back(l);
    out.value.push_back(peak + std::log(acc / static_cast<double>(losses.size())));
  }
  return out;
}

ChiSquareMixture::ChiSquareMixture(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  require(!blocks_.empty(), ErrorCode::kInvalidArgument, "chi-square mixture needs a block");
  for (const auto& b : blocks_) {
    require(b.dim >= 0, ErrorCode::kInvalidArgument, "block dimension must be >= 0");
    check_positive(b.scale, "block scale");
    check_nonneg(b.offset_sq, "block offset");
  }
}

double ChiSquareMixture::mean() const {
  double total = 0.0;
  for (const auto& b : blocks_) total += b.dim * b.scale + b.offset_sq;
  return total;
}

double ChiSquareMixture::variance() const {
  double total = 0.0;
  for (const auto& b : blocks_) total += 2.0 * b.dim * b.scale * b.scale + 4.0 * b.scale * b.offset_sq;
  return total;
}

double ChiSquareMixture::max_scale() const {
  double s = 0.0;
  for (const auto& b : blocks_)
    if (b.dim > 0) s = std::max(s, b.scale);
  return s;
}

double ChiSquareMixture::cgf(double lambda) const {
  double total = -lambda * mean();
  for (const auto& b : blocks_) {
    if (b.dim == 0) continue;
    const double q = 1.0 - 2.0 * b.scale * lambda;
    if (q <= 0.0) return kInf;
    total += -0.5 * b.dim * std::log(q) + b.offset_sq * lambda / q;
  }
  return total;
}

CgfGrid ChiSquareMixture::grid(int points, double fraction) const {
  require(points >= 2 && fraction > 0.0 && fraction < 1.0, ErrorCode::kInvalidArgument,
          "grid needs >= 2 points and a fraction in (0, 1)");
  CgfGrid out;
  out.domain_upper = pole();
  const double edge = fraction * pole();
  for (int i = -points; i <= points; ++i) {
    if (i == 0) continue;
    const double l = edge * i / points;
    out.lambda.push_back(l);
    out.value.push_back(cgf(l));
  }
  return out;
}

tail::SubGamma ChiSquareMixture::sub_gamma() const {
  return {variance(), 2.0 * max_scale()};
}

namespace {

struct WMarginal {
  Vector mean;
  double variance;
};

ChiSquareMixture::Block block_for(const Vector& mu_t, const WMarginal& w, double sigma_t2) {
  return {static_cast<int>(mu_t.size()), sigma_t2 + w.variance, (mu_t - w.mean).squaredNorm()};
}

}  // namespace

ChiSquareMixture alpha_loss_law(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  const double s1 = w.sigma_1_2(m, n);
  const double s4 = w.sigma2 * w.sigma2;
  WMarginal wm{(s1 / w.sigma_0_2) * w.mu_0 + (s1 / w.sigma2) * (n * w.mu_s + m * w.mu_t),
               s1 * s1 / s4 * (n * w.sigma_s2 + m * w.sigma_t2) + s1};
  return ChiSquareMixture({block_for(w.mu_t, wm, w.sigma_t2)});
}

ChiSquareMixture two_stage_loss_law(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  require(m >= 1, ErrorCode::kDomain, "two-stage loss law needs m >= 1");
  const double sp = w.sigma_phi_2(n);
  const double sc = w.sigma_c_2(m);
  const double s4 = w.sigma2 * w.sigma2;
  std::vector<ChiSquareMixture::Block> blocks;
  if (w.d_phi > 0) {
    WMarginal phi{(sp / w.sigma_0_2) * w.prior_phi() + (sp / w.sigma2) * n * w.mu_s.head(w.d_phi),
                  n * sp * sp * w.sigma_s2 / s4 + sp};
    blocks.push_back(block_for(w.mu_t.head(w.d_phi), phi, w.sigma_t2));
  }
  WMarginal c{(sc / w.sigma_0_2) * w.prior_c() + (sc / w.sigma2) * m * w.mu_t.tail(w.d_c),
              m * sc * sc * w.sigma_t2 / s4 + sc};
  blocks.push_back(block_for(w.mu_t.tail(w.d_c), c, w.sigma_t2));
  return ChiSquareMixture(std::move(blocks));
}

std::optional<tail::SubGaussian> fit_sub_gaussian(const CgfGrid& cgf) {
  if (std::isfinite(cgf.domain_upper) || cgf.lambda.empty()) return std::nullopt;
  double best = 0.0;
  double edge_ratio = 0.0;
  double edge_lambda = 0.0;
  double inner_ratio = 0.0;
  double max_abs = 0.0;
  for (double l : cgf.lambda) max_abs = std::max(max_abs, std::abs(l));
  for (std::size_t i = 0; i < cgf.lambda.size(); ++i) {
    const double l = cgf.lambda[i];
    if (l == 0.0) continue;
    const double ratio = 2.0 * cgf.value[i] / (l * l);
    if (!std::isfinite(ratio)) return std::nullopt;
    best = std::max(best, ratio);
    if (std::abs(l) >= edge_lambda) {
      edge_lambda = std::abs(l);
      edge_ratio = std::max(edge_ratio, ratio);
    }
    if (std::abs(l) <= 0.8 * max_abs) inner_ratio = std::max(inner_ratio, ratio);
  }
  // A ratio still climbing at the edge means no finite variance proxy.
  if (edge_ratio > 1.01 * inner_ratio && edge_ratio >= best) return std::nullopt;
  if (!(best > 0.0)) return std::nullopt;
  return tail::SubGaussian{std::sqrt(best)};
}

tail::SubExponential fit_sub_exponential(const CgfGrid& cgf) {
  double max_abs = 0.0;
  double best = 0.0;
  for (std::size_t i = 0; i < cgf.lambda.size(); ++i) {
    const double l = cgf.lambda[i];
    if (l == 0.0) continue;
    max_abs = std::max(max_abs, std::abs(l));
    best = std::max(best, 2.0 * cgf.value[i] / (l * l));
  }
  if (!(max_abs > 0.0) || !(best > 0.0) || !std::isfinite(best))
    fail(ErrorCode::kDomain, "CGF grid does not support a sub-exponential fit");
  return {best, 1.0 / max_abs};
}

double certificate_violation(const TailSpec& t, const CgfGrid& cgf) {
  double worst = -kInf;
  for (std::size_t i = 0; i < cgf.lambda.size(); ++i) {
    const double bound = psi(t, cgf.lambda[i]);
    if (!std::isfinite(bound)) continue;
    worst = std::max(worst, cgf.value[i] - bound);
  }
  return worst;
}

double gaussian_world_c_alpha(const GaussianMeanWorld& world, int m, int n) {
  const InfoTriple info = channel_info(alpha_conditional_channel(world, m, n));
  return info.mutual > 0.0 ? info.lautum / info.mutual : 0.0;
}

double gaussian_world_c_beta(const GaussianMeanWorld& world, int m) {
  const InfoTriple info = channel_info(beta_conditional_channel(world, m));
  return info.mutual > 0.0 ? info.lautum / info.mutual : 0.0;
}

namespace {

constexpr int kGridPoints = 400;
constexpr double kGridFraction = 0.5;
constexpr double kCertTolerance = 1e-12;

std::vector<CertifiedBound> certified_bounds(const ChiSquareMixture& law,
                                             const Table2Algorithm& algorithm, double gamma,
                                             double c, int m, double mi) {
  std::vector<CertifiedBound> out;
  const CgfGrid grid = law.grid(kGridPoints, kGridFraction);
  const CgfGrid wide = law.grid(kGridPoints, 1.0 - 1e-6);
  const bool is_alpha = std::holds_alternative<Table2Alpha>(algorithm);

  {
    CertifiedBound cb{"sub-gaussian", tail::SubGaussian{1.0}, {}, false, ""};
    if (auto sg = fit_sub_gaussian(wide)) {
      cb.tail = *sg;
      cb.report = is_alpha ? dist_free_alpha_bound(sg->sigma, gamma,
                                                   std::get<Table2Alpha>(algorithm).alpha, c, m)
                           : dist_free_two_stage_bound(sg->sigma, gamma, c, m);
      cb.certified = certificate_violation(cb.tail, wide) <= kCertTolerance;
    } else {
      cb.note = fmt::format("CGF has a pole at lambda = {:.6g}; loss is not sub-gaussian",
                            law.pole());
    }
    out.push_back(std::move(cb));
  }

  const tail::SubExponential se = fit_sub_exponential(grid);
  {
    CertifiedBound cb{"sub-exponential", se, {}, false, ""};
    const double violation = certificate_violation(se, grid);
    try {
      cb.report = table2_bound(algorithm, se, gamma, c, m, mi);
      cb.certified = violation <= kCertTolerance;
    } catch (const Error& e) {
      cb.note = e.what();
    }
    out.push_back(std::move(cb));
  }
  {
    // Distribution-free bound with the sub-exponential variance proxy; valid while the
    // optimizing λ stays inside [0, 1/b], i.e. m ≥ 2b²I/σ_e².
    CertifiedBound cb{"dist-free-sub-exponential-proxy", se, {}, false, ""};
    const double sigma = std::sqrt(se.sigma_e2);
    cb.report = is_alpha ? dist_free_alpha_bound(sigma, gamma,
                                                 std::get<Table2Alpha>(algorithm).alpha, c, m)
                         : dist_free_two_stage_bound(sigma, gamma, c, m);
    const double boundary = 2.0 * se.b * se.b * mi / se.sigma_e2;
    cb.certified = m >= boundary && certificate_violation(se, grid) <= kCertTolerance;
    if (!cb.certified) cb.note = fmt::format("needs m >= {:.6g}", boundary);
    out.push_back(std::move(cb));
  }
  {
    const tail::SubGamma sg = law.sub_gamma();
    CertifiedBound cb{"sub-gamma", sg, {}, false, ""};
    const double violation = certificate_violation(sg, wide);
    try {
      cb.report = table2_bound(algorithm, sg, gamma, c, m);
      cb.certified = violation <= kCertTolerance;
    } catch (const Error& e) {
      cb.note = e.what();
    }
    out.push_back(std::move(cb));
  }
  {
    // ψ*⁻¹(I/m) with the sub-gamma certificate; no regime restriction.
    const tail::SubGamma sg = law.sub_gamma();
    CertifiedBound cb{"mi-sub-gamma", sg, general_mi_bound(sg, mi, m), false, ""};
    cb.certified = certificate_violation(sg, wide) <= kCertTolerance;
    out.push_back(std::move(cb));
  }
  return out;
}

}  // namespace

std::vector<CertifiedBound> gaussian_world_bounds_alpha(const GaussianMeanWorld& world, int m,
                                                        int n, double c) {
  require(n >= 1, ErrorCode::kDomain, "alpha-weighted bounds need n >= 1 so that alpha < 1");
  const InfoTriple info = channel_info(alpha_conditional_channel(world, m, n));
  return certified_bounds(alpha_loss_law(world, m, n), Table2Alpha{world.alpha_weight(m, n)},
                          world.alpha_gamma(m, n), c, m, info.mutual);
}

std::vector<CertifiedBound> gaussian_world_bounds_two_stage(const GaussianMeanWorld& world, int m,
                                                            int n, double c) {
  const InfoTriple info = channel_info(beta_conditional_channel(world, m));
  return certified_bounds(two_stage_loss_law(world, m, n), Table2TwoStage{},
                          world.stage_two_gamma(m), c, m, info.mutual);
}

}  // namespace gibbslab
