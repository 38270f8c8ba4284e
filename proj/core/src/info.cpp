#include "gibbslab/info.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace gibbslab {

namespace {

constexpr double kMaxCondition = 1e12;

struct Factor {
  Eigen::LLT<Matrix> llt;
  double logdet;
};

Factor factor_spd(const Matrix& cov, const char* what) {
  check_spd(cov, what);
  Factor f{Eigen::LLT<Matrix>(cov), 0.0};
  f.logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  return f;
}

/// S = L⁻¹ A Σ Aᵀ L⁻ᵀ with Σ_NG = L Lᵀ; shares its spectrum with Σ_NG⁻¹AΣAᵀ.
Matrix whitened_signal(const GaussianChannel& ch, const Matrix& input_cov) {
  const Eigen::LLT<Matrix> llt(ch.noise_cov);
  const Matrix B = llt.matrixL().solve(ch.A);
  Matrix S = B * input_cov * B.transpose();
  return 0.5 * (S + S.transpose());
}

double log1p_det(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    total += std::log1p(std::max(0.0, es.eigenvalues()[i]));
  return total;
}

InfoTriple triple_from(double iskl, double divergence) {
  InfoTriple t;
  t.iskl = iskl;
  t.mutual = std::max(0.0, 0.5 * iskl - divergence);
  t.lautum = t.iskl - t.mutual;
  return t;
}

Matrix block_row(int blocks, int d, double coef) {
  Matrix A(d, static_cast<Eigen::Index>(blocks) * d);
  for (int b = 0; b < blocks; ++b)
    A.middleCols(static_cast<Eigen::Index>(b) * d, d) = coef * Matrix::Identity(d, d);
  return A;
}

}  // namespace

MvGaussian MvGaussian::isotropic(const Vector& mean, double variance) {
  return {mean, variance * Matrix::Identity(mean.size(), mean.size())};
}

void check_spd(const Matrix& cov, const char* what) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    fail(ErrorCode::kDimMismatch, fmt::format("{}: covariance must be square and nonempty", what));
  if (!cov.isApprox(cov.transpose(), 1e-12) && (cov - cov.transpose()).norm() > 1e-12)
    fail(ErrorCode::kNotPositiveDefinite, fmt::format("{}: covariance is not symmetric", what));
  const Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition)
    fail(ErrorCode::kNotPositiveDefinite,
         fmt::format("{}: eigenvalues in [{:.3g}, {:.3g}] (condition limit {:.0e})", what, lo, hi,
                     kMaxCondition));
}

double gaussian_kl(const MvGaussian& p, const MvGaussian& q) {
  if (p.dim() != q.dim() || p.cov.rows() != p.dim() || q.cov.rows() != q.dim())
    fail(ErrorCode::kDimMismatch, "gaussian_kl: dimension mismatch");
  const Factor fp = factor_spd(p.cov, "gaussian_kl p");
  const Factor fq = factor_spd(q.cov, "gaussian_kl q");
  const Vector diff = q.mean - p.mean;
  const double trace = fq.llt.solve(p.cov).trace();
  const double maha = diff.dot(fq.llt.solve(diff));
  const double kl = 0.5 * (trace + maha - p.dim() + fq.logdet - fp.logdet);
  return std::max(0.0, kl);
}

double gaussian_skl(const MvGaussian& p, const MvGaussian& q) {
  return gaussian_kl(p, q) + gaussian_kl(q, p);
}

double gaussian_kl(const GaussianPosterior& p, const GaussianPosterior& q) {
  if (p.dim() != q.dim()) fail(ErrorCode::kDimMismatch, "gaussian_kl: dimension mismatch");
  if (!(p.variance > 0.0) || !(q.variance > 0.0))
    fail(ErrorCode::kNotPositiveDefinite, "gaussian_kl: variance must be > 0");
  const double d = p.dim();
  const double r = p.variance / q.variance;
  return std::max(0.0,
                  0.5 * (d * r + (q.mean - p.mean).squaredNorm() / q.variance - d - d * std::log(r)));
}

double gaussian_skl(const GaussianPosterior& p, const GaussianPosterior& q) {
  return gaussian_kl(p, q) + gaussian_kl(q, p);
}

void GaussianChannel::validate() const {
  if (input_cov.rows() != A.cols() || input_cov.cols() != A.cols())
    fail(ErrorCode::kDimMismatch, "channel: input covariance does not match A columns");
  if (noise_cov.rows() != A.rows() || noise_cov.cols() != A.rows())
    fail(ErrorCode::kDimMismatch, "channel: noise covariance does not match A rows");
  if (noise_mean.size() != A.rows())
    fail(ErrorCode::kDimMismatch, "channel: noise mean does not match A rows");
  if ((input_cov - input_cov.transpose()).norm() > 1e-12 * (1.0 + input_cov.norm()))
    fail(ErrorCode::kNotPositiveDefinite, "channel: input covariance is not symmetric");
  check_spd(noise_cov, "channel noise");
}

InfoTriple channel_info(const GaussianChannel& ch) {
  ch.validate();
  const Matrix S = whitened_signal(ch, ch.input_cov);
  const double iskl = S.trace();
  // D(P_Y‖P_NG) for P_Y = N(noise_mean, AΣAᵀ + Σ_NG).
  const double divergence = 0.5 * (iskl - log1p_det(S));
  return triple_from(iskl, divergence);
}

InfoTriple channel_info(const GaussianChannel& ch, const SampleDistribution& input,
                        std::uint64_t draws, std::uint64_t seed) {
  ch.validate();
  if (input.dim() != ch.dim_x())
    fail(ErrorCode::kDimMismatch, "channel: input sampler dimension does not match A");
  if (draws < 40) fail(ErrorCode::kInsufficientTrials, "plug-in channel info needs >= 40 draws");

  Rng rng = make_stream(seed, 0);
  const Matrix X = input.draw_matrix(rng, static_cast<int>(draws));
  auto plug_in = [&](const Matrix& xs) {
    const Vector mean = xs.rowwise().mean();
    const Matrix centered = xs.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(xs.cols() - 1);
    const Matrix S = whitened_signal(ch, cov);
    return 0.5 * (S.trace() - log1p_det(S));
  };

  const double divergence = plug_in(X);
  constexpr int kBatches = 20;
  const Eigen::Index per = X.cols() / kBatches;
  RunningStats batch;
  for (int b = 0; b < kBatches; ++b) batch.add(plug_in(X.middleCols(b * per, per)));

  const auto moments = input.moments();
  const Matrix cov =
      moments ? moments->covariance
              : Matrix((X.colwise() - X.rowwise().mean()) *
                       (X.colwise() - X.rowwise().mean()).transpose() /
                       static_cast<double>(X.cols() - 1));
  InfoTriple t = triple_from(whitened_signal(ch, cov).trace(), divergence);
  // Batch means use 1/kBatches of the data each, so their spread overstates
  // the full-sample error by √kBatches.
  t.std_error = std::sqrt(batch.variance() / kBatches);
  t.warnings.push_back(
      "D(P_Y||P_NG) from a Gaussian fit of P_Y: a lower bound for non-Gaussian inputs, so "
      "mutual may be overstated and lautum understated");
  return t;
}

McEstimate mutual_information_mc(const GaussianChannel& ch, std::uint64_t draws,
                                 std::uint64_t seed, int threads) {
  ch.validate();
  if (draws < 2) fail(ErrorCode::kInsufficientTrials, "need >= 2 draws");
  const int dx = ch.dim_x();
  const int dy = ch.dim_y();
  Matrix in_factor = Matrix::Zero(dx, dx);
  if (dx > 0 && ch.input_cov.norm() > 0.0) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(ch.input_cov);
    in_factor = es.eigenvectors() *
                es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  const Eigen::LLT<Matrix> noise(ch.noise_cov);
  const Matrix noise_l = noise.matrixL();
  const Matrix cov_y = ch.A * ch.input_cov * ch.A.transpose() + ch.noise_cov;
  const Eigen::LLT<Matrix> marg(cov_y);
  const double logdet_noise = 2.0 * noise.matrixLLT().diagonal().array().log().sum();
  const double logdet_y = 2.0 * marg.matrixLLT().diagonal().array().log().sum();

  auto stats = monte_carlo<1>(
      draws, seed, 1,
      [&](Rng& rng, std::array<double, 1>& out) {
        Vector u(dx), e(dy);
        fill_standard_normal(rng, u);
        fill_standard_normal(rng, e);
        const Vector noise_draw = noise_l * e;
        const Vector y_centered = ch.A * (in_factor * u) + noise_draw;
        const double cond = noise.matrixL().solve(noise_draw).squaredNorm();
        const double margq = marg.matrixL().solve(y_centered).squaredNorm();
        out[0] = 0.5 * (logdet_y - logdet_noise) - 0.5 * cond + 0.5 * margq;
      },
      threads);
  return {stats[0].mean(), stats[0].std_error(), stats[0].count()};
}

GaussianChannel alpha_conditional_channel(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  require(m >= 1, ErrorCode::kEmptyDataset, "conditional channel needs m >= 1");
  const double s1 = w.sigma_1_2(m, n);
  GaussianChannel ch;
  ch.A = block_row(m, w.d, s1 / w.sigma2);
  ch.input_cov = w.sigma_t2 * Matrix::Identity(ch.A.cols(), ch.A.cols());
  ch.noise_cov = s1 * Matrix::Identity(w.d, w.d);
  ch.noise_mean = Vector::Zero(w.d);
  return ch;
}

GaussianChannel beta_conditional_channel(const GaussianMeanWorld& w, int m) {
  w.validate();
  require(m >= 1, ErrorCode::kEmptyDataset, "conditional channel needs m >= 1");
  const double sc = w.sigma_c_2(m);
  GaussianChannel ch;
  ch.A = block_row(m, w.d_c, sc / w.sigma2);
  ch.input_cov = w.sigma_t2 * Matrix::Identity(ch.A.cols(), ch.A.cols());
  ch.noise_cov = sc * Matrix::Identity(w.d_c, w.d_c);
  ch.noise_mean = Vector::Zero(w.d_c);
  return ch;
}

GaussianChannel alpha_joint_channel(const GaussianMeanWorld& w, int m, int n) {
  w.validate();
  const double s1 = w.sigma_1_2(m, n);
  GaussianChannel ch;
  ch.A = block_row(m + n, w.d, s1 / w.sigma2);
  const Eigen::Index target_cols = static_cast<Eigen::Index>(m) * w.d;
  Vector diag(ch.A.cols());
  diag.head(target_cols).setConstant(w.sigma_t2);
  diag.tail(ch.A.cols() - target_cols).setConstant(w.sigma_s2);
  ch.input_cov = diag.asDiagonal();
  ch.noise_cov = s1 * Matrix::Identity(w.d, w.d);
  ch.noise_mean = Vector::Zero(w.d);
  return ch;
}

double conditional_iskl_alpha_channel(const GaussianMeanWorld& w, int m, int n) {
  return channel_info(alpha_conditional_channel(w, m, n)).iskl;
}

double conditional_iskl_beta_channel(const GaussianMeanWorld& w, int m) {
  return channel_info(beta_conditional_channel(w, m)).iskl;
}

double joint_iskl_alpha_channel(const GaussianMeanWorld& w, int m, int n) {
  return channel_info(alpha_joint_channel(w, m, n)).iskl;
}

PairIdentity gibbs_pair_identity_check(const GaussianPosterior& posterior_data,
                                       const GaussianPosterior& posterior_pop, double gap) {
  const double lhs = gaussian_skl(posterior_data, posterior_pop);
  return {lhs, gap, std::abs(lhs - gap)};
}

namespace {

/// E_{N(a, vI)}[‖W − μ‖² + dσ_t² − (1/m)Σ‖z_j − W‖²]; the v terms cancel.
double expected_gap_integrand(const Vector& a, const Vector& mu, const Matrix& z) {
  const double emp = (z.colwise() - a).colwise().squaredNorm().mean();
  return (a - mu).squaredNorm() - emp;
}

}  // namespace

double alpha_pair_gap(const GaussianMeanWorld& w, const Dataset& ds, const Dataset& dt) {
  const int m = dt.count();
  const int n = ds.count();
  require(m >= 1, ErrorCode::kEmptyDataset, "pair gap needs target data");
  const GaussianPosterior data = alpha_posterior(w, ds, dt);
  const GaussianPosterior pop = alpha_population_posterior(w, ds, m);
  const double ga = w.alpha_gamma(m, n) * w.alpha_weight(m, n);
  return ga * (expected_gap_integrand(data.mean, w.mu_t, dt.samples()) -
               expected_gap_integrand(pop.mean, w.mu_t, dt.samples()));
}

double two_stage_pair_gap(const GaussianMeanWorld& w, VecRef w_phi, const Dataset& dt) {
  const int m = dt.count();
  const GaussianPosterior data = two_stage_posterior(w, w_phi, dt);
  const GaussianPosterior pop = two_stage_population_posterior(w, w_phi, m);
  const Matrix zc = dt.samples().bottomRows(w.d_c);
  const Vector mu_c = w.mu_t.tail(w.d_c);
  return w.stage_two_gamma(m) *
         (expected_gap_integrand(data.mean, mu_c, zc) - expected_gap_integrand(pop.mean, mu_c, zc));
}

}  // namespace gibbslab
