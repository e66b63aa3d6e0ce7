#include <benchmark/benchmark.h>

#include "inbox/evaluation.hpp"
#include "inbox/model.hpp"
#include "inbox/rng.hpp"

namespace {

using namespace inbox;

ParamStore store_for(std::size_t n_items, std::size_t dim) {
  ModelDims dims{n_items, 8, 4, 1, dim};
  return init_params(dims, InitConfig{}, 1);
}

void BM_AttentionIntersect(benchmark::State& state) {
  const ParamStore store = store_for(16, 64);
  Rng rng(4);
  std::vector<Box> boxes;
  for (int i = 0; i < state.range(0); ++i) {
    Box b(64);
    for (std::size_t k = 0; k < 64; ++k) {
      b.center[k] = rng.uniform(-2.0, 2.0);
      b.offset[k] = rng.uniform(0.0, 1.0);
    }
    boxes.push_back(std::move(b));
  }
  std::vector<BoxView> views(boxes.begin(), boxes.end());
  for (auto _ : state) benchmark::DoNotOptimize(attention_intersect(views, store));
}
BENCHMARK(BM_AttentionIntersect)->Arg(2)->Arg(8);

// Scores every item for one user box and takes the top 20.
void BM_RankAllItems(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ParamStore store = store_for(n, 64);
  Box user(64);
  for (std::size_t k = 0; k < 64; ++k) user.offset[k] = 1.0;
  const std::vector<Id> mask;
  for (auto _ : state) {
    const auto scores = score_items(user, store);
    benchmark::DoNotOptimize(top_k(scores, mask, 20));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RankAllItems)->Arg(10000)->Arg(50000);

}  // namespace
