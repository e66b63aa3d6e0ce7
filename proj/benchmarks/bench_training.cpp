#include <benchmark/benchmark.h>

#include "inbox/synthbench.hpp"
#include "inbox/training.hpp"

namespace {

using namespace inbox;

struct Setup {
  Dataset ds;
  TrainConfig cfg;
  TrainingView view;
  ParamStore store;
};

Setup& setup() {
  static Setup s = [] {
    SynthConfig sc;
    sc.seed = 1;
    Setup out{generate_synthetic(sc).dataset(), {}, {}, {}};
    out.cfg.dim = 32;
    out.cfg.batch_size = 64;
    out.cfg.n_negatives = 32;
    out.cfg.interest.history_cap = 16;
    Rng rng(1);
    out.view = make_training_view(out.ds.graph, 0.05, rng);
    out.store = init_pipeline(out.ds, out.cfg).store;
    return out;
  }();
  return s;
}

// One forward/backward pass over a freshly sampled batch of the stage.
void BM_GradStep(benchmark::State& state) {
  Setup& s = setup();
  const auto stage = static_cast<Stage>(state.range(0));
  const BatchSampler sampler(s.ds, s.view, s.cfg);
  Rng rng(2);
  const std::span<const std::pair<Id, Id>> pairs(s.view.pairs);
  const std::span<const Id> items(sampler.intersection_items());
  for (auto _ : state) {
    state.PauseTiming();
    Batch b;
    switch (stage) {
      case Stage::Pretrain: b = sampler.pretrain_batch(rng); break;
      case Stage::Intersection: b = sampler.intersection_batch(items.first(64), rng); break;
      case Stage::Recommendation: b = sampler.recommendation_batch(pairs.first(64), rng); break;
    }
    state.ResumeTiming();
    benchmark::DoNotOptimize(grad_step(b, s.store, s.ds.concepts, s.cfg));
  }
}
BENCHMARK(BM_GradStep)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

}  // namespace
