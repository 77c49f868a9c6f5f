// Serial vs OpenMP measurement of a multi-artifact program.
#include <benchmark/benchmark.h>

#include "jitcheck/program.hpp"
#include "support/fixtures.hpp"

using namespace jitcheck;

namespace {

struct Workload {
  MeasurementProgram program;
  std::vector<Bytes> contents;
  std::vector<ByteView> views;
};

Workload make_workload(int artifacts, std::size_t size) {
  SeededRandom rng(7);
  std::vector<ArtifactId> targets;
  Workload w;
  for (int i = 0; i < artifacts; ++i) {
    targets.push_back({"lib/a" + std::to_string(i) + ".jar", "1"});
    w.contents.push_back(testing_support::random_bytes(rng, size));
  }
  for (const auto& c : w.contents) w.views.emplace_back(c);
  w.program = generate_program("bench", targets, {}, 0, 60, rng);
  return w;
}

template <auto Kernel>
void BM_measure(benchmark::State& state) {
  const auto w = make_workload(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    auto digests = Kernel(w.program, w.views);
    benchmark::DoNotOptimize(digests);
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * state.range(1));
}

}  // namespace

BENCHMARK_TEMPLATE(BM_measure, measure_serial)->Args({8, 1 << 16})->Args({8, 1 << 20})->Args({32, 1 << 18});
BENCHMARK_TEMPLATE(BM_measure, measure_parallel)->Args({8, 1 << 16})->Args({8, 1 << 20})->Args({32, 1 << 18});

BENCHMARK_MAIN();
