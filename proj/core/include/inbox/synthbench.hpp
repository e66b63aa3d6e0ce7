#pragma once

// Synthetic datasets with planted concept geometry.
//
// Concepts are axis-aligned boxes in [0, 1]^d_true. Users share a pool of
// interest regions, each the intersection of concepts_per_interest concept
// boxes. Half the items are drawn inside an interest region, the rest inside
// a single random concept; every box containing an item's point becomes an
// IRT triplet. A region's positives are split 80/20 once, so test items are
// never training positives of that region and can only be found through the
// knowledge graph.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inbox/evaluation.hpp"
#include "inbox/kg_data.hpp"

namespace inbox {

struct SynthConfig {
  std::size_t n_concepts = 20;
  std::size_t n_items = 2000;
  std::size_t n_users = 200;
  std::size_t d_true = 8;
  std::size_t concepts_per_interest = 2;
  // Target number of positives per interest region.
  std::size_t items_per_user = 25;
  std::size_t n_relations = 4;
  double noise = 0.0;
  double test_fraction = 0.2;
  double targeted_fraction = 0.5;
  double min_half_width = 0.2;
  double max_half_width = 0.35;
  bool emit_trt = true;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

struct PlantedBox {
  Vec lo;
  Vec hi;
  bool contains(std::span<const double> p) const;
  // Per-dimension outside distance, 0 inside.
  double dist_out(std::span<const double> p) const;
  double dist_center(std::span<const double> p) const;
};

struct GroundTruth {
  std::size_t d_true = 0;
  std::vector<PlantedBox> concepts;
  std::vector<Concept> concept_ids;  // (relation, tag) of each planted box
  std::vector<Vec> item_points;
  std::vector<std::vector<std::size_t>> item_concepts;
  std::vector<std::vector<std::size_t>> interests;  // concept indices per region
  std::vector<PlantedBox> interest_regions;
  std::vector<std::size_t> user_interest;
};

struct SynthData {
  std::string train_txt;
  std::string test_txt;
  std::string kg_txt;
  GroundTruth truth;

  // Parses the three files the same way load_dataset would.
  Dataset dataset() const;
};

SynthData generate_synthetic(const SynthConfig& cfg);

// train.txt, test.txt, kg_final.txt, item_list.txt and ground_truth.json.
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);
std::string ground_truth_json(const GroundTruth& truth);

// Ranks by true outside distance to the user's region, then by distance to
// its center.
EvalReport oracle_metrics(const GroundTruth& truth, const InteractionGraph& graph,
                          const EvalOptions& opts = {});
// Uniformly random scores.
EvalReport random_baseline(const InteractionGraph& graph, std::uint64_t seed,
                           const EvalOptions& opts = {});

}  // namespace inbox
