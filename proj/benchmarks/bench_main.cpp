#include <benchmark/benchmark.h>

#include "lbbart/calibration.hpp"
#include "lbbart/data.hpp"
#include "lbbart/sampler.hpp"
#include "lbbart/tree_prior.hpp"

using namespace lbbart;

namespace {

Tree random_tree(unsigned leaves, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  Tree t = sample_uniform_shape(leaves, rng);
  for (NodeId id : t.internal_nodes()) t.change_rule(id, {uniform_index(rng, 3), uniform01(rng)});
  return t;
}

const Dataset& sim_data() {
  static const Dataset d = [] {
    Rng rng = make_stream(1, kDataStream);
    return simulate_cart(300, 0.5, rng);
  }();
  return d;
}

}  // namespace

static void BM_LbLogPrior(benchmark::State& state) {
  const Tree t = random_tree(static_cast<unsigned>(state.range(0)), 3);
  const PriorSpec prior = LossBasedPrior{};
  for (auto _ : state) benchmark::DoNotOptimize(log_prior(t, prior));
}
BENCHMARK(BM_LbLogPrior)->Arg(4)->Arg(16)->Arg(64)->Arg(256);

static void BM_ClLogPrior(benchmark::State& state) {
  const Tree t = random_tree(static_cast<unsigned>(state.range(0)), 3);
  const PriorSpec prior = ClassicPrior{};
  for (auto _ : state) benchmark::DoNotOptimize(log_prior(t, prior));
}
BENCHMARK(BM_ClLogPrior)->Arg(4)->Arg(16)->Arg(64)->Arg(256);

static void BM_CountTrees(benchmark::State& state) {
  const auto n = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(log_count_trees(n, n % 2));
}
BENCHMARK(BM_CountTrees)->Arg(20)->Arg(200)->Arg(2000);

static void BM_GrowPrune(benchmark::State& state) {
  Tree t = random_tree(static_cast<unsigned>(state.range(0)), 5);
  const NodeId leaf = t.leaves().front();
  for (auto _ : state) {
    t.grow(leaf, {0, 0.5});
    t.prune(leaf);
    benchmark::DoNotOptimize(t.stats());
  }
}
BENCHMARK(BM_GrowPrune)->Arg(4)->Arg(64);

static void BM_SwapRules(benchmark::State& state) {
  Tree t = random_tree(static_cast<unsigned>(state.range(0)), 6);
  const auto pairs = t.swappable_pairs();
  std::size_t k = 0;
  for (auto _ : state) {
    const auto [a, b] = pairs[k++ % pairs.size()];
    t.swap_rules(a, b);
    benchmark::DoNotOptimize(t.stats());
  }
}
BENCHMARK(BM_SwapRules)->Arg(8)->Arg(64);

static void BM_MhStep(benchmark::State& state) {
  const Dataset& d = sim_data();
  const ObservationModel model = default_gaussian_model(d.y);
  const PriorSpec prior = LossBasedPrior{};
  SamplerConfig config;
  config.rules.mode = SplitValueMode::kContinuous;
  Rng rng = make_stream(7, 0);
  Tree t;
  for (int i = 0; i < 200; ++i) mh_step(t, d.X, d.y, model, prior, config, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mh_step(t, d.X, d.y, model, prior, config, rng));
}
BENCHMARK(BM_MhStep);

static void BM_BartIteration(benchmark::State& state) {
  const Dataset& d = sim_data();
  const auto m = static_cast<std::size_t>(state.range(0));
  ChainConfig c;
  c.iterations = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_bart_chain(d.X, d.y, default_gaussian_model(d.y, m), ClassicPrior{}, m, c,
                                            make_stream(1, 0)));
}
BENCHMARK(BM_BartIteration)->Arg(1)->Arg(20);

static void BM_Calibrate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(maximize_expected_loss(ExpectedLossSpec{}));
}
BENCHMARK(BM_Calibrate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
