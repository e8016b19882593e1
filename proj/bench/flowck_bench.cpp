// Serial reference vs OpenMP checking of many-function programs.

#include <benchmark/benchmark.h>

#include <random>

#include "flowck/checker.hpp"
#include "flowck/parser.hpp"
#include "program_gen.hpp"

namespace {

flowck::Program make_program(int functions) {
  std::mt19937_64 rng(42);
  gen::ProgramShape shape;
  shape.max_statements = 30;
  std::string text = gen::prelude();
  for (int i = 0; i < functions; ++i) text += gen::random_function(rng, shape, "f" + std::to_string(i)) + "\n";
  auto parsed = flowck::parse_program(text, "bench.ifc");
  if (!parsed.ok()) throw std::runtime_error("generated program does not parse");
  return std::move(*parsed.program);
}

void BM_CheckSerial(benchmark::State& state) {
  auto prog = make_program(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(flowck::check_program_serial(prog));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CheckParallel(benchmark::State& state) {
  auto prog = make_program(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(flowck::check_program(prog));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_CheckSerial)->RangeMultiplier(4)->Range(16, 1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CheckParallel)->RangeMultiplier(4)->Range(16, 1024)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
