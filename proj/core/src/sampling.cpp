#include "inbox/sampling.hpp"

#include <algorithm>
#include <iterator>
#include <string>

#include "inbox/errors.hpp"

namespace inbox {

std::vector<Id> sample_filtered(Id begin, Id end, std::span<const Id> positives, std::size_t n,
                                Rng& rng) {
  if (end <= begin) {
    throw SamplingError("empty admissible range [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ")");
  }
  const std::uint64_t width = end - begin;
  std::vector<Id> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Id draw = begin;
    for (int attempt = 0; attempt <= kNegativeRetryBudget; ++attempt) {
      draw = static_cast<Id>(begin + rng.below(width));
      if (!std::binary_search(positives.begin(), positives.end(), draw)) break;
    }
    out.push_back(draw);
  }
  return out;
}

NegativeSampler::NegativeSampler(const Dataset& ds) : ds_(&ds) {
  const auto n_items = ds.n_items();
  concept_storage_.resize(n_items);
  concept_positives_.resize(n_items);
  for (Id i = 0; i < n_items; ++i) {
    const auto concepts = ds.concepts.concepts_of(i);
    if (concepts.empty()) {
      concept_storage_[i] = {i};
      concept_positives_[i] = concept_storage_[i];
    } else if (concepts.size() == 1) {
      concept_positives_[i] = ds.concepts.items_of(concepts[0]);
    } else {
      auto acc = std::vector<Id>(ds.concepts.items_of(concepts[0]).begin(),
                                 ds.concepts.items_of(concepts[0]).end());
      for (std::size_t c = 1; c < concepts.size() && !acc.empty(); ++c) {
        const auto other = ds.concepts.items_of(concepts[c]);
        std::vector<Id> next;
        std::set_intersection(acc.begin(), acc.end(), other.begin(), other.end(),
                              std::back_inserter(next));
        acc = std::move(next);
      }
      concept_storage_[i] = std::move(acc);
      concept_positives_[i] = concept_storage_[i];
    }
  }
}

std::vector<Negative> NegativeSampler::sample(NegativeKind kind, const NegativeContext& ctx,
                                              std::size_t n, Rng& rng) const {
  const auto n_items = static_cast<Id>(ds_->n_items());
  const auto n_tags = static_cast<Id>(ds_->n_tags());
  std::vector<Negative> out;
  out.reserve(n);
  const auto wrap = [&out](const std::vector<Id>& ids, bool tag) {
    for (Id id : ids) out.push_back({id, tag});
  };

  switch (kind) {
    case NegativeKind::HeadEntity: {
      const auto& t = ctx.triplet;
      const auto pos = ds_->answers.heads(ctx.type, t.relation, t.tail);
      const Id end = ctx.type == TripletType::TRT ? n_tags : n_items;
      wrap(sample_filtered(0, end, pos, n, rng), ctx.type == TripletType::TRT);
      break;
    }
    case NegativeKind::ItemOrTag: {
      const auto& t = ctx.triplet;
      const auto item_pos = ds_->answers.heads(TripletType::IRT, t.relation, t.tail);
      const auto tag_pos = ds_->answers.irt_tags(t.head, t.relation);
      for (std::size_t k = 0; k < n; ++k) {
        const bool tag = rng.bernoulli(0.5);
        const auto ids = tag ? sample_filtered(0, n_tags, tag_pos, 1, rng)
                             : sample_filtered(0, n_items, item_pos, 1, rng);
        out.push_back({ids[0], tag});
      }
      break;
    }
    case NegativeKind::ItemNotInConcepts: {
      if (ctx.item >= n_items) throw RangeError("negative sampling: item out of range");
      wrap(sample_filtered(0, n_items, concept_positives_[ctx.item], n, rng), false);
      break;
    }
    case NegativeKind::ItemNotInteracted: {
      if (ctx.user >= ds_->n_users()) throw RangeError("negative sampling: user out of range");
      wrap(sample_filtered(0, n_items, ds_->graph.train[ctx.user], n, rng), false);
      break;
    }
  }
  return out;
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Pretrain: return "pretrain";
    case Stage::Intersection: return "intersection";
    case Stage::Recommendation: return "recommendation";
  }
  return "?";
}

double sample_weight(Stage stage, std::size_t count, double alpha) {
  if (count == 0) throw ContractError("sample_weight: zero count");
  const double n = static_cast<double>(count);
  switch (stage) {
    case Stage::Pretrain: return 1.0 / n;
    case Stage::Intersection: return 1.0 / (n + 1.0);
    case Stage::Recommendation: return 1.0 / (n + alpha);
  }
  return 1.0;
}

TripletTypeSampler::TripletTypeSampler(const TypedTripletStore& store, bool only_irt) {
  const double iri = only_irt ? 0.0 : static_cast<double>(store.iri.size());
  const double trt = only_irt ? 0.0 : static_cast<double>(store.trt.size());
  const double irt = static_cast<double>(store.irt.size());
  const double total = iri + trt + irt;
  if (total == 0.0) throw ContractError("triplet type sampler: all triplet classes are empty");
  probs_ = {iri / total, trt / total, irt / total};
}

TripletType TripletTypeSampler::operator()(Rng& rng) const {
  const double u = rng.uniform();
  if (u < probs_[0]) return TripletType::IRI;
  if (u < probs_[0] + probs_[1]) return TripletType::TRT;
  // Guard against rounding leaving a zero-probability class reachable.
  if (probs_[2] == 0.0) return probs_[1] > 0.0 ? TripletType::TRT : TripletType::IRI;
  return TripletType::IRT;
}

}  // namespace inbox
