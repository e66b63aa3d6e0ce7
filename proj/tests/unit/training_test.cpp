#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/synthbench.hpp"
#include "inbox/training.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

TEST(MarginLoss, BalancedExample) {
  const std::vector<double> negs{12.0, 12.0, 12.0};
  EXPECT_NEAR(margin_loss(12.0, negs, 1.0, 12.0, false), 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(margin_loss(12.0, negs, 1.0, 12.0, false), 1.3863, 5e-5);
}

TEST(MarginLoss, LinearInWeight) {
  const std::vector<double> negs{3.0, 9.5};
  for (bool literal : {false, true}) {
    EXPECT_NEAR(margin_loss(4.0, negs, 2.0, 6.0, literal),
                2.0 * margin_loss(4.0, negs, 1.0, 6.0, literal), 1e-12);
  }
}

TEST(MarginLoss, BoundedFormVanishesAtIdealDistances) {
  const std::vector<double> far{1e3, 1e3};
  EXPECT_LT(margin_loss(0.0, far, 1.0, 40.0, false), 1e-15);
}

TEST(MarginLoss, LiteralFormMatchesPrintedExpression) {
  // -w (log s(g - dp) - 1/n sum log s(g - dn)) with s the logistic function.
  const auto s = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double g = 5.0, dp = 3.0, w = 0.7;
  const std::vector<double> dn{2.0, 8.0};
  const double want = -w * (std::log(s(g - dp)) - 0.5 * (std::log(s(g - 2.0)) + std::log(s(g - 8.0))));
  EXPECT_NEAR(margin_loss(dp, dn, w, g, true), want, 1e-12);
  // Unbounded below as negatives move away.
  EXPECT_LT(margin_loss(dp, std::vector<double>{1e3}, w, g, true), -100.0);
}

TEST(MarginLoss, Monotonicity) {
  const std::vector<double> negs{4.0, 7.0};
  double prev = -1e300;
  for (double dp = 0.0; dp < 20.0; dp += 0.5) {
    const double l = margin_loss(dp, negs, 1.0, 6.0, false);
    EXPECT_GT(l, prev);
    prev = l;
  }
  prev = 1e300;
  for (double dn = 0.0; dn < 20.0; dn += 0.5) {
    const double l = margin_loss(3.0, std::vector<double>{dn, 7.0}, 1.0, 6.0, false);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(MarginLoss, GradientMatchesDifferences) {
  const std::vector<double> negs{4.0, 7.5, 9.0};
  for (bool literal : {false, true}) {
    const auto g = margin_loss_grad(5.0, negs, 0.3, 6.0, literal);
    const double h = 1e-6;
    EXPECT_NEAR(g.d_pos,
                (margin_loss(5.0 + h, negs, 0.3, 6.0, literal) -
                 margin_loss(5.0 - h, negs, 0.3, 6.0, literal)) / (2 * h),
                1e-8);
    for (std::size_t i = 0; i < negs.size(); ++i) {
      auto p = negs, m = negs;
      p[i] += h;
      m[i] -= h;
      EXPECT_NEAR(g.d_negs[i],
                  (margin_loss(5.0, p, 0.3, 6.0, literal) - margin_loss(5.0, m, 0.3, 6.0, literal)) /
                      (2 * h),
                  1e-8);
    }
  }
}

TEST(MarginLoss, NeedsNegatives) {
  EXPECT_THROW(margin_loss(1.0, std::vector<double>{}, 1.0, 1.0, false), ContractError);
}

TEST(LrSchedule, PublishedDefaults) {
  const TrainConfig cfg;
  EXPECT_DOUBLE_EQ(lr_schedule(0, 1000, cfg), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(499, 1000, cfg), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(500, 1000, cfg), 2e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(600, 1000, cfg), 2e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(750, 1000, cfg), 4e-6);
  EXPECT_DOUBLE_EQ(lr_schedule(900, 1000, cfg), 4e-6);
}

ParamTables scalar_table(double x) {
  ParamTables p;
  p.items = Table(1, 1);
  p.items.row(0)[0] = x;
  return p;
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamTables p = scalar_table(1.5);
  OptimizerState st;
  for (int i = 0; i < 10; ++i) adam_update(p, scalar_table(0.0), st, 0.1);
  EXPECT_EQ(p.items.row(0)[0], 1.5);
}

TEST(Adam, MatchesScalarReference) {
  ParamTables p = scalar_table(0.0);
  OptimizerState st;
  const double lr = 0.01, g = 0.5;
  double x = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    const double grad = g * (t % 7 == 0 ? -1.0 : 1.0);
    adam_update(p, scalar_table(grad), st, lr);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= lr * mh / (std::sqrt(vh) + 1e-8);
    ASSERT_NEAR(p.items.row(0)[0], x, 1e-12) << "step " << t;
  }
  EXPECT_EQ(st.step, 200u);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  ParamTables p = scalar_table(0.0);
  OptimizerState st;
  double prev = 0.0;
  for (int t = 0; t < 100; ++t) {
    adam_update(p, scalar_table(3.0), st, 0.01);
    const double step = prev - p.items.row(0)[0];
    prev = p.items.row(0)[0];
    EXPECT_NEAR(step, 0.01, 1e-6);
  }
}

TEST(ClipGradients, ScalesToMaxNorm) {
  ParamTables t;
  t.items = Table(1, 2);
  t.items.row(0)[0] = 300;
  t.items.row(0)[1] = 400;
  EXPECT_DOUBLE_EQ(clip_gradients(t, 100.0), 500.0);
  EXPECT_DOUBLE_EQ(t.items.row(0)[0], 60.0);
  EXPECT_DOUBLE_EQ(t.items.row(0)[1], 80.0);
  EXPECT_DOUBLE_EQ(clip_gradients(t, 100.0), 100.0);
  EXPECT_DOUBLE_EQ(t.items.row(0)[0], 60.0);
}

TEST(TrainConfig, StageToggles) {
  TrainConfig cfg;
  EXPECT_EQ(enabled_stages(cfg),
            (std::vector<Stage>{Stage::Pretrain, Stage::Intersection, Stage::Recommendation}));
  cfg.pretrain = false;
  cfg.intersection = false;
  EXPECT_EQ(enabled_stages(cfg), std::vector<Stage>{Stage::Recommendation});
}

TEST(TrainConfig, ValidateRejectsBadValues) {
  auto bad = [](auto mutate) {
    TrainConfig cfg;
    mutate(cfg);
    EXPECT_THROW(cfg.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.n_negatives = 0; });
  bad([](TrainConfig& c) { c.lr_milestones = {0.5, 1.0}; });
  bad([](TrainConfig& c) { c.lr_milestones = {0.75, 0.5}; });
  bad([](TrainConfig& c) { c.lr_factors = {0.2}; });
  bad([](TrainConfig& c) { c.base_lr = 0.0; });
  bad([](TrainConfig& c) { c.dim = 0; });
  TrainConfig ok;
  EXPECT_NO_THROW(ok.validate());
}

TEST(TrainingView, HoldsOutFivePercentPerUser) {
  InteractionGraph g;
  g.n_users = 4;
  g.n_items = 100;
  g.train_history = {{1}, {1, 2}, {}, {}};
  for (Id i = 0; i < 41; ++i) g.train_history[3].push_back(i);
  g.train = g.train_history;
  g.test.resize(4);
  Rng rng(3);
  const auto v = make_training_view(g, 0.05, rng);
  EXPECT_EQ(v.graph.test[0].size(), 0u);  // m = 1 keeps its only item
  EXPECT_EQ(v.graph.test[1].size(), 1u);  // ceil(0.1) = 1, capped at m - 1
  EXPECT_EQ(v.graph.test[2].size(), 0u);
  EXPECT_EQ(v.graph.test[3].size(), 3u);  // ceil(2.05)
  EXPECT_EQ(v.graph.train[3].size(), 38u);
  EXPECT_EQ(v.pairs.size(), 1u + 1u + 38u);
  for (const auto& [u, i] : v.pairs) {
    EXPECT_TRUE(v.graph.in_train(u, i));
    EXPECT_FALSE(std::binary_search(v.graph.test[u].begin(), v.graph.test[u].end(), i));
  }
}

TEST(BatchSampler, EpochLengthsAndWeights) {
  const Dataset ds = testing::toy_dataset();
  TrainConfig cfg = testing::toy_config(4);
  cfg.validation_fraction = 0.0;
  Rng vr(1);
  const auto view = make_training_view(ds.graph, 0.0, vr);
  const BatchSampler s(ds, view, cfg);
  EXPECT_EQ(s.atoms(Stage::Pretrain), 13u);
  EXPECT_EQ(s.steps_per_epoch(Stage::Pretrain), 4u);  // ceil(13 / 4)
  EXPECT_EQ(s.atoms(Stage::Intersection), 5u);
  EXPECT_EQ(s.steps_per_epoch(Stage::Intersection), 2u);
  EXPECT_EQ(s.atoms(Stage::Recommendation), 9u);

  Rng rng(2);
  const Batch b = s.recommendation_batch(view.pairs, rng);
  EXPECT_EQ(b.size(), 9u);
  EXPECT_EQ(b.recommendation.size(), 3u);
  for (const auto& g : b.recommendation) {
    for (const auto& ex : g.examples) {
      EXPECT_DOUBLE_EQ(ex.weight, 1.0 / (view.graph.train[g.user].size() + 4.0));
      EXPECT_EQ(ex.negatives.size(), 3u);
      for (Id n : ex.negatives) EXPECT_FALSE(view.graph.in_train(g.user, n));
    }
  }
  const Batch ib = s.intersection_batch(s.intersection_items(), rng);
  for (const auto& ex : ib.intersection) {
    EXPECT_DOUBLE_EQ(ex.weight, 1.0 / (ds.concepts.concepts_of(ex.item).size() + 1.0));
  }
  const Batch pb = s.pretrain_batch(rng);
  EXPECT_EQ(pb.pretrain.size(), 4u);
  const auto type = pb.pretrain[0].type;
  for (const auto& ex : pb.pretrain) EXPECT_EQ(ex.type, type);
}

TEST(LogRecord, Format) {
  std::ostringstream os;
  write_log_record(os, {Stage::Intersection, 3, 120, 0.5, 2e-5,
                        std::numeric_limits<double>::quiet_NaN()});
  write_log_record(os, {Stage::Recommendation, 1, 7, 1.25, 1e-4, 0.5});
  EXPECT_EQ(os.str(), "2 3 120 0.5 2e-05 nan\n3 1 7 1.25 0.0001 0.500000\n");
}

// --- pipeline on small synthetic data ---------------------------------------

Dataset small_synth(std::size_t n_users, std::uint64_t seed) {
  SynthConfig sc;
  sc.n_users = n_users;
  sc.n_items = 400;
  sc.seed = seed;
  return generate_synthetic(sc).dataset();
}

TEST(Pipeline, RecommendationLossDecreasesOverFirstEpochs) {
  std::vector<double> mean(5, 0.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset ds = small_synth(50, seed);
    TrainConfig cfg;
    cfg.dim = 16;
    cfg.pretrain = false;
    cfg.intersection = false;
    cfg.batch_size = 64;
    cfg.n_negatives = 16;
    cfg.base_lr = 0.01;
    cfg.epochs_recommendation = 5;
    cfg.patience = 100;
    cfg.seed = seed;
    std::vector<double> losses;
    PipelineHooks hooks;
    hooks.on_epoch = [&](const LogRecord& r) { losses.push_back(r.loss); };
    run_pipeline(ds, cfg, hooks);
    ASSERT_EQ(losses.size(), 5u);
    for (std::size_t e = 0; e < 5; ++e) mean[e] += losses[e] / 3.0;
  }
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(mean[e], mean[e - 1]) << "epoch " << e + 1;
}

TrainConfig tiny_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.batch_size = 64;
  cfg.n_negatives = 8;
  cfg.base_lr = 0.01;
  cfg.epochs_pretrain = 2;
  cfg.epochs_intersection = 2;
  cfg.epochs_recommendation = 2;
  cfg.seed = seed;
  return cfg;
}

TEST(Pipeline, EarlyStopAfterTwoFlatEpochs) {
  const Dataset ds = small_synth(30, 4);
  TrainConfig cfg = tiny_config(4);
  cfg.pretrain = false;
  cfg.intersection = false;
  cfg.base_lr = 1e-300;  // parameters never move, so validation recall is flat
  cfg.epochs_recommendation = 10;
  std::vector<LogRecord> recs;
  PipelineHooks hooks;
  hooks.on_epoch = [&](const LogRecord& r) { recs.push_back(r); };
  run_pipeline(ds, cfg, hooks);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].recall20, recs[2].recall20);
}

TEST(Pipeline, LogsEveryEnabledStage) {
  const Dataset ds = small_synth(30, 5);
  TrainConfig cfg = tiny_config(5);
  std::vector<LogRecord> recs;
  std::vector<Stage> ended;
  PipelineHooks hooks;
  hooks.on_epoch = [&](const LogRecord& r) { recs.push_back(r); };
  hooks.on_stage_end = [&](Stage s, const PipelineState& st) {
    ended.push_back(s);
    EXPECT_EQ(st.store.stage_completed, static_cast<int>(s));
  };
  const auto st = run_pipeline(ds, cfg, hooks);
  EXPECT_EQ(ended, (std::vector<Stage>{Stage::Pretrain, Stage::Intersection,
                                       Stage::Recommendation}));
  ASSERT_EQ(recs.size(), 6u);
  EXPECT_TRUE(std::isnan(recs[0].recall20));
  EXPECT_FALSE(std::isnan(recs[5].recall20));
  EXPECT_GT(st.optimizer.step, 0u);
}

TEST(Pipeline, BitReproducibleAndResumable) {
  const Dataset ds = small_synth(30, 6);
  const TrainConfig cfg = tiny_config(6);
  PipelineState after_stage2;
  PipelineHooks hooks;
  hooks.on_stage_end = [&](Stage s, const PipelineState& st) {
    if (s == Stage::Intersection) after_stage2 = st;
  };
  const auto a = run_pipeline(ds, cfg, hooks);
  const auto b = run_pipeline(ds, cfg);
  EXPECT_EQ(a.store.params, b.store.params);
  EXPECT_EQ(a.optimizer, b.optimizer);

  run_pipeline(ds, cfg, after_stage2);
  EXPECT_EQ(after_stage2.store.params, a.store.params);
  EXPECT_EQ(after_stage2.optimizer, a.optimizer);
}

TEST(Pipeline, NonFiniteStateRejected) {
  const Dataset ds = small_synth(30, 7);
  TrainConfig cfg = tiny_config(7);
  cfg.intersection = false;
  cfg.pretrain = false;
  PipelineState st = init_pipeline(ds, cfg);
  for (double& x : st.store.params.items.data()) x = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(run_pipeline(ds, cfg, st), DivergedError);
}

TEST(Pipeline, ShapeMismatchRejected) {
  const Dataset ds = small_synth(30, 8);
  const Dataset other = small_synth(31, 8);
  const TrainConfig cfg = tiny_config(8);
  PipelineState st = init_pipeline(other, cfg);
  EXPECT_THROW(run_pipeline(ds, cfg, st), DataError);
}

}  // namespace
}  // namespace inbox
