#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace gibbslab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, substream). Streams never overlap
/// in practice because the three words are mixed through SplitMix64.
Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

/// Seed for the index-th grid point of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

double standard_normal(Rng& rng);
void fill_standard_normal(Rng& rng, Eigen::Ref<Vector> out);
void fill_standard_normal(Rng& rng, Eigen::Ref<Matrix> out);
inline void fill_standard_normal(Rng& rng, Vector& out) {
  fill_standard_normal(rng, Eigen::Ref<Vector>(out));
}
inline void fill_standard_normal(Rng& rng, Matrix& out) {
  fill_standard_normal(rng, Eigen::Ref<Matrix>(out));
}

struct Moments {
  Vector mean;
  Matrix covariance;
};

/// Source of i.i.d. samples in R^d.
class SampleDistribution {
 public:
  virtual ~SampleDistribution() = default;
  virtual int dim() const = 0;
  virtual void draw(Rng& rng, Eigen::Ref<Vector> out) const = 0;
  /// Exact first two moments when known.
  virtual std::optional<Moments> moments() const { return std::nullopt; }

  Vector draw(Rng& rng) const;
  /// d x count matrix, one sample per column.
  Matrix draw_matrix(Rng& rng, int count) const;
};

class IsotropicGaussian final : public SampleDistribution {
 public:
  IsotropicGaussian(Vector mean, double variance);

  int dim() const override { return static_cast<int>(mean_.size()); }
  void draw(Rng& rng, Eigen::Ref<Vector> out) const override;
  std::optional<Moments> moments() const override;

  const Vector& mean() const { return mean_; }
  double variance() const { return variance_; }

 private:
  Vector mean_;
  double variance_;
  double scale_;
};

/// Welford accumulator with Chan's parallel merge.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& other);

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance (0 for fewer than two observations).
  double variance() const;
  double std_error() const;

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline constexpr std::uint64_t kTrialsPerChunk = 4096;

/// Resolves a requested thread count (0 = hardware concurrency).
int resolve_threads(int requested);

/// Runs body(chunk) for chunk in [0, num_chunks) on a small thread pool.
void parallel_chunks(std::uint64_t num_chunks, int threads,
                     const std::function<void(std::uint64_t)>& body);

/// Monte Carlo driver. `trial(rng, out)` fills K statistics for one trial.
/// Trials are grouped into fixed chunks with their own RNG stream and chunk
/// results are merged in order, so output does not depend on `threads`.
template <std::size_t K, class TrialFn>
std::array<RunningStats, K> monte_carlo(std::uint64_t trials, std::uint64_t seed,
                                        std::uint64_t stream, TrialFn&& trial,
                                        int threads = 0) {
  const std::uint64_t chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  std::vector<std::array<RunningStats, K>> partial(chunks);
  parallel_chunks(chunks, threads, [&](std::uint64_t c) {
    Rng rng = make_stream(seed, stream, c);
    const std::uint64_t begin = c * kTrialsPerChunk;
    const std::uint64_t end = std::min(trials, begin + kTrialsPerChunk);
    std::array<double, K> out{};
    auto& acc = partial[c];
    for (std::uint64_t t = begin; t < end; ++t) {
      trial(rng, out);
      for (std::size_t k = 0; k < K; ++k) acc[k].add(out[k]);
    }
  });
  std::array<RunningStats, K> total{};
  for (const auto& p : partial)
    for (std::size_t k = 0; k < K; ++k) total[k].merge(p[k]);
  return total;
}

}  // namespace gibbslab
