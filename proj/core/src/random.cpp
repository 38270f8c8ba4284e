#include "gibbslab/random.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <boost/random/normal_distribution.hpp>

#include "gibbslab/error.hpp"

namespace gibbslab {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::uint64_t state = seed;
  std::uint64_t key = splitmix64(state);
  state = key ^ (stream * 0xd1b54a32d192ed03ULL);
  key = splitmix64(state);
  state = key ^ (substream * 0x8cb92ba72f3d8dd7ULL);
  std::array<std::uint32_t, 8> words{};
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t v = splitmix64(state);
    words[i] = static_cast<std::uint32_t>(v);
    words[i + 1] = static_cast<std::uint32_t>(v >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed ^ (index * 0xa0761d6478bd642fULL);
  return splitmix64(state);
}

double standard_normal(Rng& rng) {
  boost::random::normal_distribution<double> dist;
  return dist(rng);
}

void fill_standard_normal(Rng& rng, Eigen::Ref<Vector> out) {
  boost::random::normal_distribution<double> dist;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = dist(rng);
}

void fill_standard_normal(Rng& rng, Eigen::Ref<Matrix> out) {
  boost::random::normal_distribution<double> dist;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = dist(rng);
}

Vector SampleDistribution::draw(Rng& rng) const {
  Vector v(dim());
  draw(rng, v);
  return v;
}

Matrix SampleDistribution::draw_matrix(Rng& rng, int count) const {
  Matrix out(dim(), count);
  for (int j = 0; j < count; ++j) draw(rng, out.col(j));
  return out;
}

IsotropicGaussian::IsotropicGaussian(Vector mean, double variance)
    : mean_(std::move(mean)), variance_(variance), scale_(std::sqrt(variance)) {
  require(mean_.size() >= 1, ErrorCode::kInvalidArgument, "gaussian dimension must be >= 1");
  require(variance >= 0.0 && std::isfinite(variance), ErrorCode::kDomain,
          "gaussian variance must be finite and >= 0");
}

void IsotropicGaussian::draw(Rng& rng, Eigen::Ref<Vector> out) const {
  fill_standard_normal(rng, out);
  out = mean_ + scale_ * out;
}

std::optional<Moments> IsotropicGaussian::moments() const {
  return Moments{mean_, variance_ * Matrix::Identity(dim(), dim())};
}

void RunningStats::add(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const double delta = other.mean_ - mean_;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  count_ += other.count_;
}

double RunningStats::variance() const {
  if (count_ < 2) return 0.0;
  return std::max(0.0, m2_ / static_cast<double>(count_ - 1));
}

double RunningStats::std_error() const {
  if (count_ < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(count_));
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::uint64_t num_chunks, int threads,
                     const std::function<void(std::uint64_t)>& body) {
  const auto workers = static_cast<std::uint64_t>(resolve_threads(threads));
  if (workers <= 1 || num_chunks <= 1) {
    for (std::uint64_t c = 0; c < num_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      try {
        body(c);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(num_chunks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::uint64_t n = std::min(workers, num_chunks);
  pool.reserve(n - 1);
  for (std::uint64_t i = 1; i < n; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gibbslab
