#include "inbox/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "inbox/errors.hpp"

namespace inbox {

double score(PointView item, BoxView user_box, double margin) {
  return margin - dist_pb(item, user_box);
}

std::vector<Id> top_k(std::span<const double> scores, std::span<const Id> mask, std::size_t k) {
  std::vector<Id> cand;
  cand.reserve(scores.size());
  for (Id i = 0; i < scores.size(); ++i) {
    if (!std::binary_search(mask.begin(), mask.end(), i)) cand.push_back(i);
  }
  const auto better = [&scores](Id a, Id b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  const std::size_t n = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end(),
                    better);
  cand.resize(n);
  return cand;
}

std::vector<double> score_items(const Box& user_box, const ParamStore& store) {
  std::vector<double> s(store.dims.n_items);
  for (Id i = 0; i < s.size(); ++i) s[i] = score(store.item(i), user_box, store.margin);
  return s;
}

std::vector<Id> rank_items(Id user, const ParamStore& store, const Dataset& ds,
                           const InterestConfig& interest, std::size_t k) {
  const Box b = user_interest_box(user, store, ds, interest);
  return top_k(score_items(b, store), ds.graph.train[user], k);
}

double recall_at_k(std::span<const Id> topk, std::span<const Id> test) {
  if (test.empty()) throw ContractError("recall_at_k: empty test set");
  std::size_t hits = 0;
  for (Id i : topk) hits += std::binary_search(test.begin(), test.end(), i) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double ndcg_at_k(std::span<const Id> topk, std::span<const Id> test) {
  if (test.empty()) throw ContractError("ndcg_at_k: empty test set");
  double dcg = 0.0;
  for (std::size_t p = 0; p < topk.size(); ++p) {
    if (std::binary_search(test.begin(), test.end(), topk[p])) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(topk.size(), test.size());
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

EvalReport evaluate_scores(const InteractionGraph& graph, const UserScorer& scorer,
                           const EvalOptions& opts) {
  if (opts.k == 0) throw ContractError("evaluate: K must be positive");
  std::vector<Id> users;
  for (Id u = 0; u < graph.n_users; ++u) {
    if (!graph.test[u].empty()) users.push_back(u);
  }
  if (users.empty()) throw ContractError("evaluate: no user has test items");

  std::vector<UserMetrics> metrics(users.size());
  const auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores;
    for (std::size_t j = begin; j < end; ++j) {
      const Id u = users[j];
      scores.assign(graph.n_items, 0.0);
      scorer(u, scores);
      const auto top = top_k(scores, graph.train[u], opts.k);
      metrics[j] = {u, recall_at_k(top, graph.test[u]), ndcg_at_k(top, graph.test[u])};
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, users.size()));
  if (threads == 1) {
    work(0, users.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (users.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(users.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  // Reduction in user order keeps the result independent of thread count.
  EvalReport r;
  r.k = opts.k;
  r.n_users = users.size();
  for (const auto& m : metrics) {
    r.recall += m.recall;
    r.ndcg += m.ndcg;
  }
  r.recall /= static_cast<double>(users.size());
  r.ndcg /= static_cast<double>(users.size());
  if (opts.keep_per_user) r.per_user = std::move(metrics);
  return r;
}

EvalReport evaluate(const ParamStore& store, const InteractionGraph& graph,
                    const ConceptIndex& concepts, const InterestConfig& interest,
                    const EvalOptions& opts) {
  if (graph.n_items != store.dims.n_items || graph.n_users != store.dims.n_users) {
    throw DataError("evaluate: store has " + std::to_string(store.dims.n_users) + " users / " +
                    std::to_string(store.dims.n_items) + " items, dataset has " +
                    std::to_string(graph.n_users) + " / " + std::to_string(graph.n_items));
  }
  const UserScorer scorer = [&](Id u, std::vector<double>& scores) {
    const auto hist = user_history(graph, u, interest.history_cap);
    if (hist.empty()) {
      // No training history: nothing to build a box from, so every item ties.
      std::fill(scores.begin(), scores.end(), 0.0);
      return;
    }
    const Box b = mean_interest_box(hist, u, store, concepts, interest);
    for (Id i = 0; i < scores.size(); ++i) scores[i] = score(store.item(i), b, store.margin);
  };
  return evaluate_scores(graph, scorer, opts);
}

EvalReport evaluate_all(const ParamStore& store, const Dataset& ds,
                        const InterestConfig& interest, const EvalOptions& opts) {
  return evaluate(store, ds.graph, ds.concepts, interest, opts);
}

void write_report(const EvalReport& r, std::ostream& out) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "recall %.8f %zu %zu\n", r.recall, r.k, r.n_users);
  out << buf;
  std::snprintf(buf, sizeof(buf), "ndcg %.8f %zu %zu\n", r.ndcg, r.k, r.n_users);
  out << buf;
}

void write_report(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report '" + path.string() + "'");
  write_report(r, out);
}

}  // namespace inbox
