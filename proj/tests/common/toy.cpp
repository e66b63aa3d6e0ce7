#include "toy.hpp"

#include <sstream>

namespace inbox::testing {

Dataset toy_dataset() {
  std::istringstream train("0 0 1 4\n1 2 3 4\n2 0 3 5\n");
  std::istringstream test("0 2\n1 5\n2 1\n");
  InteractionGraph g = parse_interactions(train, test);
  std::istringstream kg(
      "0 0 1\n2 0 3\n"            // item-item
      "6 1 7\n8 1 9\n"            // tag-tag
      "0 2 6\n0 3 7\n1 2 6\n1 3 8\n2 2 7\n3 3 9\n4 2 8\n4 3 6\n4 2 9\n");
  TypedTripletStore store = parse_kg(kg, g.n_items);
  return make_dataset(std::move(g), std::move(store));
}

ParamStore toy_store(const Dataset& ds, std::size_t dim, std::uint64_t seed, double margin) {
  ModelDims dims{ds.n_items(), ds.n_tags(), ds.n_relations(), ds.n_users(), dim};
  InitConfig init;
  init.margin = margin;
  init.scale = 4.0;  // spread points so distances sit around the margin
  ParamStore s = init_params(dims, init, seed);
  return s;
}

TrainConfig toy_config(std::size_t dim) {
  TrainConfig cfg;
  cfg.dim = dim;
  cfg.margin = 3.0;
  cfg.batch_size = 4;
  cfg.n_negatives = 3;
  return cfg;
}

Batch toy_pretrain_batch(TripletType type) {
  Batch b;
  b.stage = Stage::Pretrain;
  PretrainExample ex;
  ex.type = type;
  switch (type) {
    case TripletType::IRI:
      ex.triplet = {0, 0, 1};
      ex.negatives = {{2, false}, {3, false}, {5, false}};
      b.pretrain.push_back(ex);
      ex.triplet = {2, 0, 3};
      ex.negatives = {{4, false}, {1, false}};
      ex.weight = 0.5;
      b.pretrain.push_back(ex);
      break;
    case TripletType::TRT:
      ex.triplet = {0, 1, 1};
      ex.negatives = {{2, false}, {3, false}};
      b.pretrain.push_back(ex);
      ex.triplet = {2, 1, 3};
      ex.negatives = {{0, false}, {1, false}};
      b.pretrain.push_back(ex);
      break;
    case TripletType::IRT:
      // Relation 2 with tag 0 (entity 6); mixed item and tag replacements.
      ex.triplet = {0, 2, 0};
      ex.negatives = {{3, false}, {2, true}, {5, false}, {3, true}};
      b.pretrain.push_back(ex);
      ex.triplet = {4, 3, 0};
      ex.negatives = {{1, true}, {2, false}};
      ex.weight = 0.5;
      b.pretrain.push_back(ex);
      break;
  }
  return b;
}

Batch toy_intersection_batch() {
  Batch b;
  b.stage = Stage::Intersection;
  b.intersection.push_back({0, {3, 5}, 1.0 / 3.0});
  b.intersection.push_back({4, {0, 2, 5}, 0.25});
  b.intersection.push_back({2, {4}, 0.5});
  return b;
}

Batch toy_recommendation_batch() {
  Batch b;
  b.stage = Stage::Recommendation;
  RecommendationGroup g0;
  g0.user = 0;
  g0.history = {0, 1, 4};
  g0.examples.push_back({1, {2, 3}, 1.0 / 7.0});
  g0.examples.push_back({4, {5}, 1.0 / 7.0});
  b.recommendation.push_back(g0);
  RecommendationGroup g2;
  g2.user = 2;
  g2.history = {0, 3, 5};
  g2.examples.push_back({1, {2, 4}, 1.0 / 7.0});
  b.recommendation.push_back(g2);
  return b;
}

}  // namespace inbox::testing
