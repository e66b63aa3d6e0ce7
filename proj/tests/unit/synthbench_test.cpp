#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/synthbench.hpp"

namespace inbox {
namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.n_items = 600;
  c.n_users = 60;
  c.seed = seed;
  return c;
}

TEST(Synth, DeterministicForSeed) {
  const auto a = generate_synthetic(small(3));
  const auto b = generate_synthetic(small(3));
  const auto c = generate_synthetic(small(4));
  EXPECT_EQ(a.train_txt, b.train_txt);
  EXPECT_EQ(a.test_txt, b.test_txt);
  EXPECT_EQ(a.kg_txt, b.kg_txt);
  EXPECT_EQ(ground_truth_json(a.truth), ground_truth_json(b.truth));
  EXPECT_NE(a.train_txt, c.train_txt);
}

TEST(Synth, TripletsMatchPlantedMembership) {
  const auto data = generate_synthetic(small(5));
  const Dataset ds = data.dataset();
  const auto& gt = data.truth;
  std::size_t irt = 0;
  for (Id i = 0; i < ds.n_items(); ++i) {
    std::size_t inside = 0;
    for (const auto& box : gt.concepts) inside += box.contains(gt.item_points[i]) ? 1 : 0;
    EXPECT_EQ(inside, gt.item_concepts[i].size()) << "item " << i;
    EXPECT_EQ(ds.concepts.concepts_of(i).size(), inside) << "item " << i;
    irt += inside;
  }
  EXPECT_EQ(ds.kg.irt.size(), irt);
  EXPECT_EQ(ds.kg.trt.size(), gt.concepts.size());
  EXPECT_EQ(ds.kg.iri.size(), 0u);
}

TEST(Synth, NoiselessPositivesLieInTheUsersRegion) {
  const auto data = generate_synthetic(small(6));
  const Dataset ds = data.dataset();
  const auto& gt = data.truth;
  for (Id u = 0; u < ds.n_users(); ++u) {
    const auto& region = gt.interest_regions[gt.user_interest[u]];
    for (Id i : ds.graph.train[u]) EXPECT_TRUE(region.contains(gt.item_points[i]));
    for (Id i : ds.graph.test[u]) {
      EXPECT_TRUE(region.contains(gt.item_points[i]));
      EXPECT_FALSE(ds.graph.in_train(u, i));
    }
  }
}

TEST(Synth, NoiseMovesInteractionsOut) {
  auto cfg = small(6);
  cfg.noise = 0.5;
  const auto data = generate_synthetic(cfg);
  const Dataset ds = data.dataset();
  std::size_t outside = 0, total = 0;
  for (Id u = 0; u < ds.n_users(); ++u) {
    const auto& region = data.truth.interest_regions[data.truth.user_interest[u]];
    for (Id i : ds.graph.train[u]) {
      outside += region.contains(data.truth.item_points[i]) ? 0 : 1;
      ++total;
    }
  }
  EXPECT_GT(outside, total / 4);
}

TEST(Synth, OracleIsPerfectAndRandomIsChance) {
  double random_sum = 0.0, chance_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = generate_synthetic(small(seed));
    const Dataset ds = data.dataset();
    EXPECT_DOUBLE_EQ(oracle_metrics(data.truth, ds.graph).recall, 1.0);
    random_sum += random_baseline(ds.graph, seed).recall;
    // Expected recall of a uniform ranking: 20 slots over the unmasked items.
    double chance = 0.0;
    std::size_t users = 0;
    for (Id u = 0; u < ds.n_users(); ++u) {
      if (ds.graph.test[u].empty()) continue;
      chance += 20.0 / static_cast<double>(ds.n_items() - ds.graph.train[u].size());
      ++users;
    }
    chance_sum += chance / static_cast<double>(users);
  }
  EXPECT_NEAR(random_sum / chance_sum, 1.0, 0.5);
}

TEST(Synth, SingleConceptInterests) {
  auto cfg = small(7);
  cfg.concepts_per_interest = 1;
  const auto data = generate_synthetic(cfg);
  for (const auto& members : data.truth.interests) EXPECT_EQ(members.size(), 1u);
  const Dataset ds = data.dataset();
  EXPECT_DOUBLE_EQ(oracle_metrics(data.truth, ds.graph).recall, 1.0);
}

TEST(Synth, InvalidConfigRejected) {
  auto cfg = small(1);
  cfg.n_items = 0;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
  cfg = small(1);
  cfg.concepts_per_interest = 0;
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(Synth, WrittenFilesLoadBack) {
  const auto data = generate_synthetic(small(8));
  const auto dir = std::filesystem::temp_directory_path() /
                   ("inbox_synth_" + std::to_string(::getpid()));
  write_synthetic(data, dir);
  const Dataset a = data.dataset();
  const Dataset b = load_dataset(dir);
  EXPECT_EQ(b.n_items(), 600u);
  EXPECT_EQ(b.n_users(), a.n_users());
  EXPECT_EQ(b.graph.train, a.graph.train);
  EXPECT_EQ(b.graph.test, a.graph.test);
  EXPECT_EQ(b.kg.irt, a.kg.irt);
  EXPECT_EQ(b.kg.trt, a.kg.trt);
  EXPECT_TRUE(std::filesystem::exists(dir / "ground_truth.json"));
  std::ifstream items(dir / "item_list.txt");
  std::string header;
  std::getline(items, header);
  EXPECT_EQ(header, "org_id remap_id");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace inbox
