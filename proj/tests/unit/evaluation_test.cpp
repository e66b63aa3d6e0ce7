#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/evaluation.hpp"
#include "inbox/synthbench.hpp"
#include "properties.hpp"

namespace inbox {
namespace {

TEST(Metrics, HandComputedFixtures) {
  for (const auto& f : testing::metric_fixtures()) {
    std::vector<Id> topk(f.topk.begin(), f.topk.end());
    std::vector<Id> test(f.test.begin(), f.test.end());
    EXPECT_NEAR(recall_at_k(topk, test), f.recall, 1e-6);
    EXPECT_NEAR(ndcg_at_k(topk, test), f.ndcg, 1e-6);
  }
}

TEST(Metrics, EmptyTestRejected) {
  const std::vector<Id> topk{1, 2};
  EXPECT_THROW(recall_at_k(topk, std::vector<Id>{}), ContractError);
  EXPECT_THROW(ndcg_at_k(topk, std::vector<Id>{}), ContractError);
}

TEST(Score, MarginMinusPointBoxDistance) {
  const Box b({0.0, 0.0}, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(score(Vec{0.0, 0.0}, b, 12.0), 12.0);
  EXPECT_DOUBLE_EQ(score(Vec{3.0, 0.0}, b, 12.0), 9.0);
  EXPECT_DOUBLE_EQ(score(Vec{0.5, -0.5}, b, 12.0), 11.0);
}

TEST(TopK, TiesByIdAndMask) {
  const std::vector<double> s{1.0, 3.0, 3.0, 2.0, 3.0, 0.5};
  EXPECT_EQ(top_k(s, std::vector<Id>{}, 4), (std::vector<Id>{1, 2, 4, 3}));
  EXPECT_EQ(top_k(s, std::vector<Id>{2}, 3), (std::vector<Id>{1, 4, 3}));
  EXPECT_EQ(top_k(s, std::vector<Id>{0, 1, 2, 3, 4}, 3), (std::vector<Id>{5}));
  EXPECT_TRUE(top_k(s, std::vector<Id>{}, 0).empty());
}

struct Fixture {
  Dataset ds;
  ParamStore store;
};

Fixture trained_free_fixture(std::uint64_t seed) {
  SynthConfig sc;
  sc.n_users = 100;
  sc.n_items = 300;
  sc.seed = seed;
  Fixture f{generate_synthetic(sc).dataset(), {}};
  ModelDims dims{f.ds.n_items(), f.ds.n_tags(), f.ds.n_relations(), f.ds.n_users(), 8};
  InitConfig init;
  init.margin = 12.0;
  f.store = init_params(dims, init, seed);
  return f;
}

// Independent recomputation: full sort over unmasked items, then the
// textbook definitions.
std::pair<double, double> brute_force(const std::vector<double>& scores,
                                      const std::vector<Id>& train, const std::vector<Id>& test,
                                      std::size_t k) {
  std::vector<std::pair<double, Id>> order;
  for (Id i = 0; i < scores.size(); ++i) {
    if (std::find(train.begin(), train.end(), i) == train.end()) order.push_back({-scores[i], i});
  }
  std::sort(order.begin(), order.end());
  order.resize(std::min(k, order.size()));
  double hits = 0.0, dcg = 0.0, idcg = 0.0;
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (std::find(test.begin(), test.end(), order[p].second) != test.end()) {
      hits += 1.0;
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  for (std::size_t p = 0; p < std::min(k, test.size()); ++p) idcg += 1.0 / std::log2(p + 2.0);
  return {hits / static_cast<double>(test.size()), dcg / idcg};
}

TEST(Evaluate, MatchesBruteForceRanking) {
  const Fixture f = trained_free_fixture(11);
  const InterestConfig interest;
  EvalOptions opts;
  opts.keep_per_user = true;
  const EvalReport r = evaluate_all(f.store, f.ds, interest, opts);

  double rsum = 0.0, nsum = 0.0;
  std::size_t users = 0;
  for (Id u = 0; u < f.ds.n_users(); ++u) {
    if (f.ds.graph.test[u].empty()) continue;
    const Box b = user_interest_box(u, f.store, f.ds, interest);
    const auto scores = score_items(b, f.store);
    const auto [rec, nd] = brute_force(scores, f.ds.graph.train[u], f.ds.graph.test[u], 20);
    ASSERT_LT(users, r.per_user.size());
    EXPECT_EQ(r.per_user[users].user, u);
    EXPECT_NEAR(r.per_user[users].recall, rec, 1e-12);
    EXPECT_NEAR(r.per_user[users].ndcg, nd, 1e-12);
    rsum += rec;
    nsum += nd;
    ++users;
  }
  EXPECT_EQ(r.n_users, users);
  EXPECT_NEAR(r.recall, rsum / users, 1e-12);
  EXPECT_NEAR(r.ndcg, nsum / users, 1e-12);
}

TEST(Evaluate, RecallMonotoneInK) {
  const Fixture f = trained_free_fixture(12);
  double prev = 0.0;
  for (std::size_t k : {1u, 5u, 10u, 20u, 50u, 300u}) {
    EvalOptions opts;
    opts.k = k;
    const double r = evaluate_all(f.store, f.ds, InterestConfig{}, opts).recall;
    EXPECT_GE(r, prev) << "k " << k;
    prev = r;
  }
  EXPECT_DOUBLE_EQ(prev, 1.0);  // every unmasked item is ranked
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  const Fixture f = trained_free_fixture(13);
  EvalOptions one;
  one.keep_per_user = true;
  EvalOptions four = one;
  four.threads = 4;
  const auto a = evaluate_all(f.store, f.ds, InterestConfig{}, one);
  const auto b = evaluate_all(f.store, f.ds, InterestConfig{}, four);
  EXPECT_EQ(a.per_user, b.per_user);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(a.ndcg, b.ndcg);
}

TEST(EvaluateScores, SkipsUsersWithoutTestItemsAndMasksTrain) {
  InteractionGraph g;
  g.n_users = 3;
  g.n_items = 5;
  g.train = {{0}, {1}, {2}};
  g.train_history = g.train;
  g.test = {{1}, {}, {3}};
  // Training items get the top score and must be skipped.
  const UserScorer scorer = [&](Id u, std::vector<double>& s) {
    for (Id i = 0; i < s.size(); ++i) s[i] = -static_cast<double>(i);
    s[g.train[u][0]] = 100.0;
  };
  EvalOptions opts;
  opts.k = 1;
  const auto r = evaluate_scores(g, scorer, opts);
  EXPECT_EQ(r.n_users, 2u);
  // User 0: top item 1 is a hit. User 2: top item 0 is a miss.
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.ndcg, 0.5);
}

TEST(EvaluateScores, NoTestUsersRejected) {
  InteractionGraph g;
  g.n_users = 1;
  g.n_items = 2;
  g.train = {{0}};
  g.train_history = g.train;
  g.test = {{}};
  const UserScorer scorer = [](Id, std::vector<double>& s) { std::fill(s.begin(), s.end(), 0.0); };
  EXPECT_THROW(evaluate_scores(g, scorer, EvalOptions{}), ContractError);
}

TEST(Report, Format) {
  EvalReport r;
  r.recall = 0.25;
  r.ndcg = 0.125;
  r.n_users = 7;
  std::ostringstream os;
  write_report(r, os);
  EXPECT_EQ(os.str(), "recall 0.25000000 20 7\nndcg 0.12500000 20 7\n");
}

}  // namespace
}  // namespace inbox
