#pragma once

// Negative sampling, per-stage sample weights and triplet-type selection.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "inbox/kg_data.hpp"
#include "inbox/rng.hpp"

namespace inbox {

// Retries per draw before an unfiltered draw is accepted.
inline constexpr int kNegativeRetryBudget = 64;

// Uniform draws from [begin, end) rejecting members of `positives` (sorted).
// Throws SamplingError when the range is empty.
std::vector<Id> sample_filtered(Id begin, Id end, std::span<const Id> positives, std::size_t n,
                                Rng& rng);

enum class NegativeKind {
  HeadEntity,         // stage 1 IRI/TRT: replace the head of (?, r, t)
  ItemOrTag,          // stage 1 IRT: replace either the item or the tag
  ItemNotInConcepts,  // stage 2: items not covered by all of the item's concepts
  ItemNotInteracted,  // stage 3: items outside the user's training set
};

struct Negative {
  Id id = 0;
  bool replaces_tag = false;  // only for ItemOrTag
  bool operator==(const Negative&) const = default;
};

// What the negatives are drawn against.
struct NegativeContext {
  TripletType type = TripletType::IRT;
  Triplet triplet{};  // HeadEntity, ItemOrTag
  Id item = 0;        // ItemNotInConcepts
  Id user = 0;        // ItemNotInteracted
};

class NegativeSampler {
 public:
  explicit NegativeSampler(const Dataset& ds);

  std::vector<Negative> sample(NegativeKind kind, const NegativeContext& ctx, std::size_t n,
                               Rng& rng) const;

  // The true-positive set a draw is filtered against.
  std::span<const Id> item_concept_positives(Id item) const { return concept_positives_[item]; }

 private:
  const Dataset* ds_;
  std::vector<std::vector<Id>> concept_storage_;
  std::vector<std::span<const Id>> concept_positives_;
};

enum class Stage { Pretrain = 1, Intersection = 2, Recommendation = 3 };
const char* to_string(Stage s);

// Stage 1: 1/|answers|. Stage 2: 1/(n_concepts + 1). Stage 3: 1/(m + alpha).
// A zero count is a ContractError.
double sample_weight(Stage stage, std::size_t count, double alpha = 4.0);

// Categorical draw over {IRI, TRT, IRT} proportional to class sizes.
class TripletTypeSampler {
 public:
  explicit TripletTypeSampler(const TypedTripletStore& store, bool only_irt = false);

  TripletType operator()(Rng& rng) const;
  double probability(TripletType t) const { return probs_[static_cast<int>(t)]; }

 private:
  std::array<double, 3> probs_{};
};

}  // namespace inbox
