#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/sampling.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

TEST(SampleFiltered, NeverReturnsKnownHeads) {
  // Three known heads out of ten entities.
  const std::vector<Id> known{2, 5, 7};
  Rng rng(3);
  const auto draws = sample_filtered(0, 10, known, 10000, rng);
  ASSERT_EQ(draws.size(), 10000u);
  for (Id d : draws) {
    EXPECT_LT(d, 10u);
    EXPECT_FALSE(std::binary_search(known.begin(), known.end(), d)) << d;
  }
}

TEST(SampleFiltered, ForcedByRejection) {
  std::vector<Id> all_but_four{0, 1, 2, 3, 5, 6};
  Rng rng(1);
  for (Id d : sample_filtered(0, 7, all_but_four, 200, rng)) EXPECT_EQ(d, 4u);
}

TEST(SampleFiltered, EmptyRangeThrows) {
  Rng rng(1);
  EXPECT_THROW(sample_filtered(5, 5, {}, 1, rng), SamplingError);
}

TEST(SampleFiltered, FallsBackWhenEverythingIsPositive) {
  std::vector<Id> all{0, 1, 2};
  Rng rng(1);
  EXPECT_EQ(sample_filtered(0, 3, all, 5, rng).size(), 5u);
}

TEST(NegativeSampler, DeterministicForFixedSeed) {
  const Dataset ds = testing::toy_dataset();
  const NegativeSampler s(ds);
  NegativeContext ctx;
  ctx.user = 1;
  Rng a(9), b(9);
  EXPECT_EQ(s.sample(NegativeKind::ItemNotInteracted, ctx, 50, a),
            s.sample(NegativeKind::ItemNotInteracted, ctx, 50, b));
}

TEST(NegativeSampler, StageThreeAvoidsTrainingItems) {
  const Dataset ds = testing::toy_dataset();
  const NegativeSampler s(ds);
  NegativeContext ctx;
  ctx.user = 0;  // trained on 0, 1, 4
  Rng rng(2);
  for (const auto& n : s.sample(NegativeKind::ItemNotInteracted, ctx, 1000, rng)) {
    EXPECT_FALSE(ds.graph.in_train(0, n.id)) << n.id;
  }
}

TEST(NegativeSampler, StageTwoAvoidsItemsSharingAllConcepts) {
  const Dataset ds = testing::toy_dataset();
  const NegativeSampler s(ds);
  // Item 0 has (r2, tag 0) and (r3, tag 1); no other item has both.
  EXPECT_EQ(std::vector<Id>(s.item_concept_positives(0).begin(),
                            s.item_concept_positives(0).end()),
            std::vector<Id>{0});
  NegativeContext ctx;
  ctx.item = 0;
  Rng rng(4);
  for (const auto& n : s.sample(NegativeKind::ItemNotInConcepts, ctx, 500, rng)) {
    EXPECT_NE(n.id, 0u);
  }
}

TEST(NegativeSampler, ItemOrTagFiltersBothSides) {
  const Dataset ds = testing::toy_dataset();
  const NegativeSampler s(ds);
  NegativeContext ctx;
  ctx.type = TripletType::IRT;
  ctx.triplet = {0, 2, 0};  // items 0 and 1 carry (r2, tag 0)
  Rng rng(5);
  std::size_t tags = 0;
  for (const auto& n : s.sample(NegativeKind::ItemOrTag, ctx, 2000, rng)) {
    if (n.replaces_tag) {
      ++tags;
      EXPECT_LT(n.id, ds.n_tags());
      EXPECT_NE(n.id, 0u);  // (0, r2, tag 0) is true
    } else {
      EXPECT_LT(n.id, ds.n_items());
      EXPECT_NE(n.id, 0u);
      EXPECT_NE(n.id, 1u);
    }
  }
  EXPECT_GT(tags, 800u);
  EXPECT_LT(tags, 1200u);
}

TEST(NegativeSampler, HeadEntityUsesTagRangeForTagTriplets) {
  const Dataset ds = testing::toy_dataset();
  const NegativeSampler s(ds);
  NegativeContext ctx;
  ctx.type = TripletType::TRT;
  ctx.triplet = {0, 1, 1};
  Rng rng(6);
  for (const auto& n : s.sample(NegativeKind::HeadEntity, ctx, 500, rng)) {
    EXPECT_LT(n.id, ds.n_tags());
    EXPECT_NE(n.id, 0u);
  }
}

TEST(SampleWeight, PerStageFormulas) {
  EXPECT_DOUBLE_EQ(sample_weight(Stage::Intersection, 4), 0.2);
  EXPECT_DOUBLE_EQ(sample_weight(Stage::Recommendation, 6, 4.0), 0.1);
  EXPECT_DOUBLE_EQ(sample_weight(Stage::Pretrain, 1), 1.0);
  EXPECT_DOUBLE_EQ(sample_weight(Stage::Pretrain, 4), 0.25);
  EXPECT_THROW(sample_weight(Stage::Pretrain, 0), ContractError);
}

TypedTripletStore store_with(std::size_t iri, std::size_t trt, std::size_t irt) {
  TypedTripletStore s;
  s.iri.resize(iri);
  s.trt.resize(trt);
  s.irt.resize(irt);
  return s;
}

TEST(TripletTypeSampler, OnlyItemTagStoreAlwaysDrawsItemTag) {
  const TripletTypeSampler s(store_with(0, 0, 7));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(s(rng), TripletType::IRT);
}

TEST(TripletTypeSampler, PublishedYelpRatios) {
  const TripletTypeSampler s(store_with(0, 984101, 869603));
  EXPECT_NEAR(s.probability(TripletType::TRT), 0.5309, 5e-5);
  EXPECT_NEAR(s.probability(TripletType::IRT), 0.4691, 5e-5);
  EXPECT_EQ(s.probability(TripletType::IRI), 0.0);
}

TEST(TripletTypeSampler, EmpiricalFrequencies) {
  const TripletTypeSampler s(store_with(100, 100, 200));
  Rng rng(11);
  std::array<std::size_t, 3> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<int>(s(rng))];
  EXPECT_NEAR(counts[0] / double(n), 0.25, 0.01);
  EXPECT_NEAR(counts[1] / double(n), 0.25, 0.01);
  EXPECT_NEAR(counts[2] / double(n), 0.5, 0.01);
}

TEST(TripletTypeSampler, OnlyIrtAndEmptyStores) {
  const TripletTypeSampler s(store_with(5, 5, 5), true);
  EXPECT_EQ(s.probability(TripletType::IRT), 1.0);
  EXPECT_THROW(TripletTypeSampler(store_with(0, 0, 0)), ContractError);
}

}  // namespace
}  // namespace inbox
