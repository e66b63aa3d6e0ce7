#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "fd_check.hpp"
#include "inbox/errors.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

class GradientCheck : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const Dataset ds = testing::toy_dataset();
  const auto cases = testing::gradient_cases();
  const auto& gc = cases.at(GetParam());
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ParamStore store = testing::toy_store(ds, 4, seed);
    testing::FdOptions opts;
    opts.seed = seed;
    const auto rep = testing::finite_difference_check(gc.batch, store, ds.concepts, gc.cfg, opts);
    SCOPED_TRACE(gc.name + " seed " + std::to_string(seed));
    EXPECT_EQ(rep.failures, 0u) << "max rel err " << rep.max_rel_err << " at " << rep.worst;
    // Every kink-free candidate is checked up to the requested count.
    EXPECT_EQ(rep.checked, std::min<std::size_t>(32, rep.candidates - rep.skipped));
    EXPECT_GE(rep.checked, 16u);
    EXPECT_LE(rep.skipped * 4, rep.candidates) << "too many coordinates near kinks";
  }
}

INSTANTIATE_TEST_SUITE_P(AllStages, GradientCheck,
                         ::testing::Range<std::size_t>(0, testing::gradient_cases().size()),
                         [](const auto& info) {
                           std::string n = testing::gradient_cases()[info.param].name;
                           std::replace(n.begin(), n.end(), '/', '_');
                           return n;
                         });

TEST(GradStep, UntouchedParametersHaveZeroGradient) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore store = testing::toy_store(ds, 4, 1);
  const TrainConfig cfg = testing::toy_config(4);
  const auto res = grad_step(testing::toy_pretrain_batch(TripletType::IRI), store, ds.concepts, cfg);
  for (double g : res.tape.users.data()) EXPECT_EQ(g, 0.0);
  for (double g : res.tape.tags.data()) EXPECT_EQ(g, 0.0);
  for (double g : res.tape.attn_net) EXPECT_EQ(g, 0.0);
  for (double g : res.tape.user_net) EXPECT_EQ(g, 0.0);
  // Item-item triplets use relation 0 only.
  for (std::size_t r = 1; r < ds.n_relations(); ++r) {
    for (double g : res.tape.relations.row(r)) EXPECT_EQ(g, 0.0);
  }
}

TEST(GradStep, Deterministic) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore store = testing::toy_store(ds, 4, 1);
  const TrainConfig cfg = testing::toy_config(4);
  const Batch b = testing::toy_recommendation_batch();
  const auto a = grad_step(b, store, ds.concepts, cfg);
  const auto c = grad_step(b, store, ds.concepts, cfg);
  EXPECT_EQ(a.loss, c.loss);
  EXPECT_EQ(a.tape, c.tape);
  EXPECT_EQ(a.loss, batch_loss(b, store, ds.concepts, cfg));
}

TEST(GradStep, FrozenAttentionReceivesNoRecommendationGradient) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore store = testing::toy_store(ds, 4, 1);
  TrainConfig cfg = testing::toy_config(4);
  const Batch b = testing::toy_recommendation_batch();
  const auto free = grad_step(b, store, ds.concepts, cfg);
  EXPECT_TRUE(std::any_of(free.tape.attn_net.begin(), free.tape.attn_net.end(),
                          [](double g) { return g != 0.0; }));
  cfg.freeze_attention_in_recommendation = true;
  const auto frozen = grad_step(b, store, ds.concepts, cfg);
  for (double g : frozen.tape.attn_net) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(frozen.tape.user_net, free.tape.user_net);
}

TEST(GradStep, NegativeOrderDoesNotChangeLoss) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore store = testing::toy_store(ds, 4, 2);
  const TrainConfig cfg = testing::toy_config(4);
  Batch b = testing::toy_intersection_batch();
  const double before = batch_loss(b, store, ds.concepts, cfg);
  for (auto& ex : b.intersection) std::reverse(ex.negatives.begin(), ex.negatives.end());
  EXPECT_NEAR(batch_loss(b, store, ds.concepts, cfg), before, 1e-12);
}

TEST(GradStep, NonFiniteLossDiverges) {
  const Dataset ds = testing::toy_dataset();
  ParamStore store = testing::toy_store(ds, 4, 1);
  store.params.items.row(0)[0] = std::numeric_limits<double>::infinity();
  const TrainConfig cfg = testing::toy_config(4);
  EXPECT_THROW(grad_step(testing::toy_pretrain_batch(TripletType::IRI), store, ds.concepts, cfg),
               DivergedError);
}

TEST(GradStep, EmptyBatchRejected) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore store = testing::toy_store(ds, 4, 1);
  Batch b;
  EXPECT_THROW(grad_step(b, store, ds.concepts, testing::toy_config(4)), ContractError);
}

}  // namespace
}  // namespace inbox
