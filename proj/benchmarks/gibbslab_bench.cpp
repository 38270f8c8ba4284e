#include <benchmark/benchmark.h>

#include "gibbslab/gaussian_world.hpp"
#include "gibbslab/harness.hpp"
#include "gibbslab/info.hpp"
#include "gibbslab/samplers.hpp"

using namespace gibbslab;

namespace {

void BM_EstimateGenAlpha(benchmark::State& state) {
  const auto world = GaussianMeanWorld::unit(static_cast<int>(state.range(0)));
  const std::uint64_t trials = 100000;
  GenOptions opt;
  opt.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_gen(GibbsAlgorithm::AlphaGibbs, world, 10, 10, trials, 1, opt));
  state.SetItemsProcessed(state.iterations() * trials);
}
BENCHMARK(BM_EstimateGenAlpha)->Arg(1)->Arg(8);

void BM_EstimateGenTwoStage(benchmark::State& state) {
  const auto world = GaussianMeanWorld::unit(4, 2);
  const std::uint64_t trials = 100000;
  GenOptions opt;
  opt.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_gen(GibbsAlgorithm::TwoStageGibbs, world, 10, 10, trials, 1, opt));
  state.SetItemsProcessed(state.iterations() * trials);
}
BENCHMARK(BM_EstimateGenTwoStage);

void BM_SgldSteps(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto world = GaussianMeanWorld::unit(d);
  Rng rng = make_stream(3, 0);
  const Dataset ds(world.source().draw_matrix(rng, 20), Role::Source);
  const Dataset dt(world.target().draw_matrix(rng, 20), Role::Target);
  SgldConfig cfg;
  cfg.steps = 10000;
  cfg.step_size = 1e-3;
  cfg.gamma = world.alpha_gamma(20, 20);
  SquaredLoss loss;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_sgld(loss, energy::AlphaWeighted{0.5}, ds, dt,
                                         GaussianPrior{world.mu_0, world.sigma_0_2}, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.steps);
}
BENCHMARK(BM_SgldSteps)->Arg(1)->Arg(16);

void BM_ChannelInfo(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto ch = alpha_joint_channel(GaussianMeanWorld::unit(2), m, m);
  for (auto _ : state) benchmark::DoNotOptimize(channel_info(ch));
}
BENCHMARK(BM_ChannelInfo)->Arg(4)->Arg(32);

}  // namespace
BENCHMARK_MAIN();
