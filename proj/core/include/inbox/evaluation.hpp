#pragma once

// All-ranking evaluation: every item outside a user's training set is
// scored, and recall/ndcg are averaged over users with a non-empty test set.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "inbox/kg_data.hpp"
#include "inbox/model.hpp"

namespace inbox {

double score(PointView item, BoxView user_box, double margin);

// Top-k ids by descending score, ties by ascending id, skipping `mask`
// (sorted). Returns fewer than k when not enough items remain.
std::vector<Id> top_k(std::span<const double> scores, std::span<const Id> mask, std::size_t k);

// Scores every item against the user's interest box.
std::vector<double> score_items(const Box& user_box, const ParamStore& store);

std::vector<Id> rank_items(Id user, const ParamStore& store, const Dataset& ds,
                           const InterestConfig& interest, std::size_t k);

// test must be sorted and non-empty.
double recall_at_k(std::span<const Id> topk, std::span<const Id> test);
double ndcg_at_k(std::span<const Id> topk, std::span<const Id> test);

struct UserMetrics {
  Id user = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  bool operator==(const UserMetrics&) const = default;
};

struct EvalReport {
  std::size_t k = 20;
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t n_users = 0;
  std::vector<UserMetrics> per_user;
};

struct EvalOptions {
  std::size_t k = 20;
  std::size_t threads = 1;
  bool keep_per_user = false;
};

// Fills `scores` (sized n_items) for one user. Must be safe to call
// concurrently for different users.
using UserScorer = std::function<void(Id user, std::vector<double>& scores)>;

// Throws ContractError when no user has test items.
EvalReport evaluate_scores(const InteractionGraph& graph, const UserScorer& scorer,
                           const EvalOptions& opts);

EvalReport evaluate(const ParamStore& store, const InteractionGraph& graph,
                    const ConceptIndex& concepts, const InterestConfig& interest,
                    const EvalOptions& opts);
EvalReport evaluate_all(const ParamStore& store, const Dataset& ds,
                        const InterestConfig& interest, const EvalOptions& opts = {});

// Lines of "metric value K n_users".
void write_report(const EvalReport& r, std::ostream& out);
void write_report(const EvalReport& r, const std::filesystem::path& path);

}  // namespace inbox
