// Parallel kernels against their serial references.
//
//   ./bench_kernels --benchmark_filter=Matmul
//   OMP_NUM_THREADS=4 ./bench_kernels
#include <benchmark/benchmark.h>

#include <vector>

#include "canids/graph_builder.hpp"
#include "canids/matrix.hpp"
#include "canids/pipeline.hpp"
#include "canids/rng.hpp"

namespace {

using namespace canids;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SeededRng rng(seed);
  DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_MatmulParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, 8, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * 8));
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, 8, 2);
  for (auto _ : state) benchmark::DoNotOptimize(serial::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * 8));
}

// One training batch worth of message graphs.
struct BatchFixture {
  std::vector<GraphTensors> tensors;
  GraphBatch batch;
  DenseMatrix rhs;

  BatchFixture() {
    SynthConfig config;
    config.normal_frames = 64 * 200;
    config.intensity[AttackKind::Fuzzy] = 1.0;
    config.segment_us = 500'000;
    config.seed = 3;
    const auto stream = synthesize(config);
    for (const auto& g : build_graphs(stream.frames)) tensors.push_back(prepare_graph(g));
    batch = batch_graphs(tensors);
    rhs = random_matrix(batch.node_count(), 8, 4);
  }
};

const BatchFixture& fixture() {
  static const BatchFixture f;
  return f;
}

void BM_BlockMatmul(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(matmul(f.batch.adjacency, f.rhs));
}

void BM_BlockMatmulSerialDense(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::matmul(f.batch.adjacency, f.rhs));
}

const std::vector<CanFrame>& stream_frames() {
  static const std::vector<CanFrame> frames = [] {
    SynthConfig config;
    config.normal_frames = 200'000;
    config.intensity[AttackKind::DoS] = 1.0;
    config.seed = 5;
    return synthesize(config).frames;
  }();
  return frames;
}

void BM_BuildGraphsParallel(benchmark::State& state) {
  const auto& frames = stream_frames();
  for (auto _ : state) benchmark::DoNotOptimize(build_graphs(frames));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}

void BM_BuildGraphsSerial(benchmark::State& state) {
  const auto& frames = stream_frames();
  for (auto _ : state) benchmark::DoNotOptimize(serial::build_graphs(frames));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}

}  // namespace

BENCHMARK(BM_MatmulParallel)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_MatmulSerial)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_BlockMatmul);
BENCHMARK(BM_BlockMatmulSerialDense);
BENCHMARK(BM_BuildGraphsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildGraphsSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
