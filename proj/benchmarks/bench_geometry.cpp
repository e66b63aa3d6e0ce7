#include <benchmark/benchmark.h>

#include "inbox/geometry.hpp"
#include "inbox/rng.hpp"

namespace {

using namespace inbox;

Box make_box(std::size_t d, Rng& rng) {
  Box b(d);
  for (std::size_t k = 0; k < d; ++k) {
    b.center[k] = rng.uniform(-2.0, 2.0);
    b.offset[k] = rng.uniform(0.0, 1.0);
  }
  return b;
}

void BM_DistPointBox(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Box b = make_box(d, rng);
  Vec p(d);
  for (double& x : p) x = rng.uniform(-3.0, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(dist_pb(p, b));
}
BENCHMARK(BM_DistPointBox)->Arg(64)->Arg(512);

void BM_DistBoxBox(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Box a = make_box(d, rng), c = make_box(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(dist_bb(a, c));
}
BENCHMARK(BM_DistBoxBox)->Arg(64)->Arg(512);

void BM_MaxMinIntersect(benchmark::State& state) {
  Rng rng(3);
  std::vector<Box> boxes;
  for (int i = 0; i < state.range(0); ++i) boxes.push_back(make_box(64, rng));
  for (auto _ : state) benchmark::DoNotOptimize(maxmin_intersect(boxes));
}
BENCHMARK(BM_MaxMinIntersect)->Arg(2)->Arg(8);

}  // namespace
