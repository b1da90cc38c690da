// OpenMP kernels against their serial references. Both sides produce
// bit-identical results; the check below aborts the run if they ever diverge.

#include <algorithm>
#include <cstdlib>
#include <random>

#include <benchmark/benchmark.h>

#include "bdl/core_math.hpp"
#include "bdl/mining.hpp"
#include "bdl/model.hpp"

using namespace bdl;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

void require_same(bool same) {
  if (!same) std::abort();
}

bool same(const Matrix& a, const Matrix& b) { return std::ranges::equal(a.data(), b.data()); }

struct MiningInput {
  EmbeddingBatch anchors;
  EmbeddingBatch positives;
  std::vector<std::size_t> owner;
  std::vector<std::int32_t> ids;
};

MiningInput mining_input(std::size_t n) {
  MiningInput in;
  in.anchors = EmbeddingBatch::normalized(gaussian(n, 16, 1));
  in.positives = EmbeddingBatch::normalized(gaussian(4 * n, 16, 2));
  for (std::size_t i = 0; i < n; ++i) {
    in.ids.push_back(static_cast<std::int32_t>(i));
    for (int q = 0; q < 4; ++q) in.owner.push_back(i);
  }
  return in;
}

void BM_PairwiseParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const EmbeddingBatch a = EmbeddingBatch::normalized(gaussian(n, 16, 3));
  require_same(same(pairwise_distances(a), reference::pairwise_distances(a)));
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_distances(a));
}

void BM_PairwiseReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const EmbeddingBatch a = EmbeddingBatch::normalized(gaussian(n, 16, 3));
  for (auto _ : state) benchmark::DoNotOptimize(reference::pairwise_distances(a));
}

void BM_MineParallel(benchmark::State& state) {
  const MiningInput in = mining_input(static_cast<std::size_t>(state.range(0)));
  require_same(mine_batch(in.anchors, in.positives, in.owner, in.ids) ==
               reference::mine_batch(in.anchors, in.positives, in.owner, in.ids));
  for (auto _ : state) benchmark::DoNotOptimize(mine_batch(in.anchors, in.positives, in.owner, in.ids));
}

void BM_MineReference(benchmark::State& state) {
  const MiningInput in = mining_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::mine_batch(in.anchors, in.positives, in.owner, in.ids));
}

void BM_EmbedParallel(benchmark::State& state) {
  const DescriptorNet net = DescriptorNet::glorot({32, 64, 64, 16}, Activation::kTanh, 1);
  const Matrix x = gaussian(static_cast<std::size_t>(state.range(0)), 32, 4);
  require_same(same(embed(net, x).matrix(), reference::embed(net, x).matrix()));
  for (auto _ : state) benchmark::DoNotOptimize(embed(net, x));
}

void BM_EmbedReference(benchmark::State& state) {
  const DescriptorNet net = DescriptorNet::glorot({32, 64, 64, 16}, Activation::kTanh, 1);
  const Matrix x = gaussian(static_cast<std::size_t>(state.range(0)), 32, 4);
  for (auto _ : state) benchmark::DoNotOptimize(reference::embed(net, x));
}

}  // namespace

BENCHMARK(BM_PairwiseParallel)->Arg(64)->Arg(320)->Arg(1024);
BENCHMARK(BM_PairwiseReference)->Arg(64)->Arg(320)->Arg(1024);
BENCHMARK(BM_MineParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_MineReference)->Arg(64)->Arg(256);
BENCHMARK(BM_EmbedParallel)->Arg(320)->Arg(4096);
BENCHMARK(BM_EmbedReference)->Arg(320)->Arg(4096);

BENCHMARK_MAIN();
