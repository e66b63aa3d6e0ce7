#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "inbox/errors.hpp"
#include "inbox/mlp.hpp"
#include "inbox/model.hpp"
#include "properties.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

using testing::random_box;
using testing::random_point;

ParamStore small_store(std::size_t d, std::uint64_t seed) {
  return init_params({3, 3, 4, 2, d}, InitConfig{}, seed);
}

void expect_near(const Vec& a, const Vec& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], tol) << "k=" << k;
}

TEST(InitParams, DeterministicForSeed) {
  EXPECT_EQ(small_store(8, 5).params, small_store(8, 5).params);
  EXPECT_NE(small_store(8, 5).params, small_store(8, 6).params);
}

TEST(InitParams, RangesAndPositiveOffsets) {
  const std::size_t d = 16;
  InitConfig cfg;  // margin 12, scale d / 8
  const ParamStore s = init_params({50, 40, 6, 10, d}, cfg, 1);
  const double bound = 12.0 / (2.0 * d) * (d / 8.0);
  for (double v : s.params.items.data()) EXPECT_LE(std::abs(v), bound);
  for (std::size_t t = 0; t < 40; ++t) {
    for (double o : s.tag(static_cast<Id>(t)).offset) {
      EXPECT_GT(o, 0.0);
      EXPECT_LE(o, 12.0 / d);
    }
  }
  for (double v : s.params.items.data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(InitParams, AcceptsPublishedDefaults) {
  InitConfig cfg;
  cfg.margin = 12.0;
  const ParamStore s = init_params({4, 3, 2, 2, 512}, cfg, 0);
  EXPECT_EQ(s.params.items.cols(), 512u);
  EXPECT_EQ(s.params.tags.cols(), 1024u);
  EXPECT_EQ(s.margin, 12.0);
}

TEST(InitParams, RejectsZeroShapes) {
  EXPECT_THROW(init_params({4, 3, 2, 2, 0}, InitConfig{}, 0), ContractError);
  EXPECT_THROW(init_params({0, 3, 2, 2, 4}, InitConfig{}, 0), ContractError);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  for (Activation act : {Activation::Relu, Activation::Tanh}) {
    MlpShape shape{5, 3, {4}, act};
    Rng rng(7);
    Vec w(shape.param_count());
    mlp_init(shape, w, rng);
    const Vec x = random_point(5, rng, 1.0);
    const Vec dy{0.3, -1.2, 0.7};
    MlpCache cache;
    Vec y(3);
    mlp_forward(shape, w, x, cache, y);
    Vec dw(w.size(), 0.0), dx(5, 0.0);
    mlp_backward(shape, w, cache, dy, dw, dx);

    auto f = [&](const Vec& ww, const Vec& xx) {
      MlpCache c;
      Vec out(3);
      mlp_forward(shape, ww, xx, c, out);
      return out[0] * dy[0] + out[1] * dy[1] + out[2] * dy[2];
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < w.size(); ++i) {
      Vec wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      EXPECT_NEAR(dw[i], (f(wp, x) - f(wm, x)) / (2 * h), 1e-6) << to_string(act) << " w" << i;
    }
    for (std::size_t i = 0; i < 5; ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      EXPECT_NEAR(dx[i], (f(w, xp) - f(w, xm)) / (2 * h), 1e-6) << to_string(act) << " x" << i;
    }
  }
}

TEST(AttentionIntersect, SingleBoxKeepsCenterAndShrinks) {
  const ParamStore s = small_store(6, 2);
  Rng rng(3);
  const Box b = random_box(6, rng);
  const std::vector<BoxView> one{b};
  const auto t = attention_intersect_forward(one, s);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_DOUBLE_EQ(t.result.center[k], b.center[k]);
    EXPECT_GT(t.gate[k], 0.0);
    EXPECT_LT(t.gate[k], 1.0);
    EXPECT_DOUBLE_EQ(t.result.offset[k], act(b.offset[k]) * t.gate[k]);
  }
}

TEST(AttentionIntersect, EqualNetworkOutputsGiveMidpoint) {
  ParamStore s = small_store(4, 2);
  // Zero weights: every box gets the bias as its logit, so attention is 1/2.
  const auto layout = s.layout();
  auto w = layout.attn_center_w(MutSpan(s.params.attn_net));
  std::fill(w.begin(), w.end(), 0.0);
  const Box a({0, 1, 2, 3}, {1, 1, 1, 1});
  const Box b({2, -1, 2, 5}, {0.5, 2, 1, 0});
  const std::vector<BoxView> boxes{a, b};
  const auto t = attention_intersect_forward(boxes, s);
  expect_near(t.result.center, {1, 0, 2, 4}, 1e-12);
  for (const auto& wi : t.weights) expect_near(wi, {0.5, 0.5, 0.5, 0.5}, 1e-12);
}

TEST(AttentionIntersect, EmptyInputThrows) {
  const ParamStore s = small_store(4, 2);
  EXPECT_THROW(attention_intersect(std::span<const BoxView>(), s), ContractError);
  EXPECT_THROW(user_bias_intersect(std::span<const BoxView>(), Vec(4, 0.0), s), ContractError);
}

TEST(IntersectionNetworks, RandomizedProperties) {
  for (const auto& r : testing::intersection_properties(1000, 99)) {
    EXPECT_EQ(r.cases, 1000u) << r.name;
    EXPECT_EQ(r.violations, 0u) << r.name << ": " << r.first_failure;
  }
}

TEST(UserBiasIntersect, IdenticalBoxesReturnThatBox) {
  const ParamStore s = small_store(5, 4);
  Rng rng(8);
  Box b = random_box(5, rng);
  const std::vector<BoxView> same{b, b, b};
  const Box r = user_bias_intersect(same, random_point(5, rng, 1.0), s);
  Vec half(5);
  for (std::size_t k = 0; k < 5; ++k) half[k] = act(b.offset[k]);
  expect_near(r.center, b.center, 1e-12);
  expect_near(r.offset, half, 1e-12);
}

TEST(Intersections, PermutationInvariant) {
  const ParamStore s = small_store(6, 9);
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Box> boxes;
    for (int i = 0; i < 4; ++i) boxes.push_back(random_box(6, rng));
    const Point u = random_point(6, rng, 1.0);
    std::vector<BoxView> v1(boxes.begin(), boxes.end());
    std::vector<BoxView> v2(boxes.rbegin(), boxes.rend());
    std::swap(v2[0], v2[2]);
    const Box a1 = attention_intersect(v1, s), a2 = attention_intersect(v2, s);
    const Box u1 = user_bias_intersect(v1, u, s), u2 = user_bias_intersect(v2, u, s);
    expect_near(a1.center, a2.center, 1e-12);
    expect_near(a1.offset, a2.offset, 1e-12);
    expect_near(u1.center, u2.center, 1e-12);
    expect_near(u1.offset, u2.offset, 1e-12);
  }
}

TEST(ConceptBoxes, ProjectTagsByRelation) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore s = testing::toy_store(ds, 4, 3);
  const auto boxes = concept_boxes(4, s, ds.concepts);
  const auto cs = ds.concepts.concepts_of(4);
  ASSERT_EQ(boxes.size(), cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const Box want = project_box(s.tag(cs[i].tag), s.relation(cs[i].relation));
    EXPECT_EQ(boxes[i].center, want.center);
    EXPECT_EQ(boxes[i].offset, want.offset);
  }
}

TEST(ItemInterestBox, MeanOfItemAndUserIntersections) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore s = testing::toy_store(ds, 4, 3);
  const auto boxes = concept_boxes(4, s, ds.concepts);
  std::vector<BoxView> views(boxes.begin(), boxes.end());
  const Box bi = attention_intersect(views, s);
  const Box bu = user_bias_intersect(views, s.user(1), s);

  InterestConfig cfg;
  const Box both = item_interest_box(4, 1, s, ds.concepts, cfg);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(both.center[k], 0.5 * (bi.center[k] + bu.center[k]));
    EXPECT_DOUBLE_EQ(both.offset[k], 0.5 * (bi.offset[k] + bu.offset[k]));
  }
  cfg.combine = CombineMode::ItemOnly;
  EXPECT_EQ(item_interest_box(4, 1, s, ds.concepts, cfg).center, bi.center);
  cfg.combine = CombineMode::UserOnly;
  EXPECT_EQ(item_interest_box(4, 1, s, ds.concepts, cfg).offset, bu.offset);
  cfg.combine = CombineMode::ItemOnly;
  cfg.variant = IntersectionVariant::MaxMin;
  const Box mm = maxmin_intersect(std::span<const Box>(boxes));
  EXPECT_EQ(item_interest_box(4, 1, s, ds.concepts, cfg).center, mm.center);
}

TEST(ItemInterestBox, ConceptlessItemFallsBackToItsPoint) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore s = testing::toy_store(ds, 4, 3);
  const Box b = item_interest_box(5, 0, s, ds.concepts, InterestConfig{});
  const Vec v(s.item(5).begin(), s.item(5).end());
  EXPECT_EQ(b.center, v);
  EXPECT_EQ(b.offset, Vec(4, 0.0));
  EXPECT_TRUE(contains(b, v));
  Vec nudged = v;
  nudged[0] += 1e-9;
  EXPECT_FALSE(contains(b, nudged));
  EXPECT_THROW(item_interest_box(6, 0, s, ds.concepts, InterestConfig{}), RangeError);
}

TEST(UserInterestBox, MeanOverHistory) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore s = testing::toy_store(ds, 4, 3);
  const InterestConfig cfg;
  const std::vector<Id> one{2};
  const Box single = mean_interest_box(one, 0, s, ds.concepts, cfg);
  const Box item = item_interest_box(2, 0, s, ds.concepts, cfg);
  expect_near(single.center, item.center, 0.0);
  expect_near(single.offset, item.offset, 0.0);

  const std::vector<Id> hist{0, 1, 4}, perm{4, 0, 1};
  const Box a = mean_interest_box(hist, 0, s, ds.concepts, cfg);
  const Box b = mean_interest_box(perm, 0, s, ds.concepts, cfg);
  expect_near(a.center, b.center, 1e-12);
  expect_near(a.offset, b.offset, 1e-12);
  Vec c(4, 0.0), h(4, 0.0);
  for (Id i : hist) {
    const Box ib = item_interest_box(i, 0, s, ds.concepts, cfg);
    for (std::size_t k = 0; k < 4; ++k) {
      c[k] += ib.center[k] / 3.0;
      h[k] += ib.offset[k] / 3.0;
    }
  }
  expect_near(a.center, c, 1e-12);
  expect_near(a.offset, h, 1e-12);
  // The user box of user 0 is the same mean over its file-order history.
  const Box u = user_interest_box(0, s, ds, cfg);
  expect_near(u.center, c, 1e-12);
  EXPECT_THROW(mean_interest_box(std::vector<Id>{}, 0, s, ds.concepts, cfg), ContractError);
}

TEST(UserHistory, KeepsMostRecentItems) {
  const Dataset ds = testing::toy_dataset();
  const auto h = user_history(ds.graph, 1, 2);
  EXPECT_EQ(std::vector<Id>(h.begin(), h.end()), (std::vector<Id>{3, 4}));
  EXPECT_EQ(user_history(ds.graph, 1, 0).size(), 3u);
}

}  // namespace
}  // namespace inbox
