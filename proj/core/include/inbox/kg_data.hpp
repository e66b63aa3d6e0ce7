#pragma once

// Interaction and knowledge-graph data.
//
// File conventions (KGAT-style releases):
//   train.txt / test.txt   one user per line: "<user> <item> <item> ..."
//   kg_final.txt           one "<head> <relation> <tail>" triple per line
// Entity ids below n_items are items, ids >= n_items are tags. Tags are
// re-indexed from zero (tag = entity - n_items) inside the library.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace inbox {

using Id = std::uint32_t;

struct InteractionGraph {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  // Sorted, duplicate-free item ids per user.
  std::vector<std::vector<Id>> train;
  std::vector<std::vector<Id>> test;
  // Training items in first-appearance file order (same set as train[u]).
  std::vector<std::vector<Id>> train_history;
  std::size_t duplicates_dropped = 0;

  std::size_t n_train_pairs() const;
  std::size_t n_test_pairs() const;
  bool in_train(Id user, Id item) const;
};

InteractionGraph parse_interactions(std::istream& train, std::istream& test);
InteractionGraph load_interactions(const std::filesystem::path& train,
                                   const std::filesystem::path& test);

enum class TripletType { IRI, TRT, IRT };
const char* to_string(TripletType t);

// For IRI: (item, relation, item); TRT: (tag, relation, tag);
// IRT: (item, relation, tag). Relations are augmented ids.
struct Triplet {
  Id head = 0;
  Id relation = 0;
  Id tail = 0;
  auto operator<=>(const Triplet&) const = default;
};

struct TypedTripletStore {
  std::size_t n_items = 0;
  std::size_t n_tags = 0;
  std::size_t n_relations_raw = 0;
  std::size_t n_relations_aug = 0;  // 2 * n_relations_raw
  std::vector<Triplet> iri;
  std::vector<Triplet> trt;
  std::vector<Triplet> irt;
  std::size_t kg_lines = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t reoriented = 0;  // (tag, r, item) rows stored as (item, r^-1, tag)

  std::size_t size() const { return iri.size() + trt.size() + irt.size(); }
  const std::vector<Triplet>& of(TripletType t) const;
  Id inverse(Id raw_relation) const { return raw_relation + static_cast<Id>(n_relations_raw); }
};

// max_entities, when given, bounds every entity id (RangeError otherwise).
TypedTripletStore parse_kg(std::istream& kg, std::size_t n_items,
                           std::optional<std::size_t> max_entities = std::nullopt);
TypedTripletStore load_kg(const std::filesystem::path& kg, std::size_t n_items,
                          std::optional<std::size_t> max_entities = std::nullopt);

// A (relation, tag) pair attached to items through IRT triplets.
struct Concept {
  Id relation = 0;
  Id tag = 0;
  auto operator<=>(const Concept&) const = default;
};

class ConceptIndex {
 public:
  ConceptIndex() = default;
  explicit ConceptIndex(const TypedTripletStore& store);

  // Sorted by (relation, tag). Throws RangeError for unknown items.
  std::span<const Concept> concepts_of(Id item) const;
  // Sorted item ids covered by the concept; empty for unknown concepts.
  std::span<const Id> items_of(Concept c) const;

  std::size_t n_items() const { return per_item_.size(); }
  std::size_t n_concepts() const { return concept_items_.size(); }
  // Items with at least one concept, ascending.
  std::vector<Id> items_with_concepts() const;

 private:
  static std::uint64_t key(Concept c) { return (std::uint64_t{c.relation} << 32) | c.tag; }
  std::vector<std::vector<Concept>> per_item_;
  std::unordered_map<std::uint64_t, std::vector<Id>> concept_items_;
};

// Sorted answer sets for filtered negative sampling and stage-1 weights.
class AnswerIndex {
 public:
  AnswerIndex() = default;
  explicit AnswerIndex(const TypedTripletStore& store);

  // Heads h with (h, relation, tail) in the given class.
  std::span<const Id> heads(TripletType type, Id relation, Id tail) const;
  // Tags t with (item, relation, t) in IRT.
  std::span<const Id> irt_tags(Id item, Id relation) const;

 private:
  using Map = std::unordered_map<std::uint64_t, std::vector<Id>>;
  static std::uint64_t key(Id a, Id b) { return (std::uint64_t{a} << 32) | b; }
  static std::span<const Id> find(const Map& m, std::uint64_t k);
  Map heads_[3];
  Map irt_tags_;
};

struct Dataset {
  InteractionGraph graph;
  TypedTripletStore kg;
  ConceptIndex concepts;
  AnswerIndex answers;

  std::size_t n_users() const { return graph.n_users; }
  std::size_t n_items() const { return graph.n_items; }
  std::size_t n_tags() const { return kg.n_tags; }
  std::size_t n_relations() const { return kg.n_relations_aug; }
};

// Builds the derived indices. The graph's n_items is authoritative for the
// entity split; kg must have been parsed with the same n_items.
Dataset make_dataset(InteractionGraph graph, TypedTripletStore kg);

// Loads train.txt, test.txt and kg_final.txt from a directory. An optional
// item_list.txt (header plus one row per item) sets the item count.
Dataset load_dataset(const std::filesystem::path& dir);

struct DatasetManifest {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_tags = 0;
  std::size_t n_relations_raw = 0;
  std::size_t n_relations_aug = 0;
  std::size_t n_train_interactions = 0;
  std::size_t n_test_interactions = 0;
  std::size_t n_interactions = 0;
  std::size_t n_iri = 0;
  std::size_t n_trt = 0;
  std::size_t n_irt = 0;
  std::size_t kg_triplets = 0;
  std::string entity_layout = "items_first";

  auto operator<=>(const DatasetManifest&) const = default;

  // Percentages of IRI / TRT / IRT among all triplets (0 when empty).
  double share(TripletType t) const;
};

DatasetManifest make_manifest(const Dataset& ds);
void write_manifest(const DatasetManifest& m, std::ostream& out);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
// Keys absent from the file keep their defaults; unknown keys are rejected.
DatasetManifest read_manifest(std::istream& in);
DatasetManifest read_manifest(const std::filesystem::path& path);
std::map<std::string, std::string> manifest_fields(const DatasetManifest& m);
// Raw key/value pairs of a manifest file, for partial expectations.
std::map<std::string, std::string> read_manifest_fields(std::istream& in);
std::map<std::string, std::string> read_manifest_fields(const std::filesystem::path& path);

// "key: expected X, got Y" for every key of `expected` that disagrees with
// `actual`; empty when they agree. Unknown keys are reported too.
std::vector<std::string> compare_manifest(const std::map<std::string, std::string>& expected,
                                          const DatasetManifest& actual);

}  // namespace inbox
