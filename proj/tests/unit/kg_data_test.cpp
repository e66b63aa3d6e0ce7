#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/kg_data.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

InteractionGraph graph_of(const std::string& train, const std::string& test) {
  std::istringstream tr(train), te(test);
  return parse_interactions(tr, te);
}

TypedTripletStore kg_of(const std::string& text, std::size_t n_items) {
  std::istringstream in(text);
  return parse_kg(in, n_items);
}

TEST(Interactions, DropsDuplicatesAndKeepsFileOrder) {
  const auto g = graph_of("0 5 7 5\n1 2\n2 9 3\n", "");
  EXPECT_EQ(g.train[0], (std::vector<Id>{5, 7}));
  EXPECT_EQ(g.train[2], (std::vector<Id>{3, 9}));
  EXPECT_EQ(g.train_history[2], (std::vector<Id>{9, 3}));
  EXPECT_EQ(g.duplicates_dropped, 1u);
  EXPECT_EQ(g.n_users, 3u);
  EXPECT_EQ(g.n_items, 10u);
}

TEST(Interactions, EmptyFilesGiveEmptyGraph) {
  const auto g = graph_of("", "");
  EXPECT_EQ(g.n_users, 0u);
  EXPECT_EQ(g.n_train_pairs() + g.n_test_pairs(), 0u);
}

TEST(Interactions, ToleratesBlankLinesAndUserGaps) {
  const auto g = graph_of("\n0 1\n\n4 2 3\n", "4 0\n");
  EXPECT_EQ(g.n_users, 5u);
  EXPECT_TRUE(g.train[2].empty());
  EXPECT_EQ(g.test[4], std::vector<Id>{0});
  EXPECT_TRUE(g.in_train(4, 3));
  EXPECT_FALSE(g.in_train(4, 0));
}

TEST(Interactions, MalformedTokenReportsLine) {
  try {
    graph_of("0 1\n1 2x\n", "");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Kg, ClassifiesTriplets) {
  // n_items = 5: entities 0..4 are items, 5.. tags.
  const auto s = kg_of("3 0 9\n1 1 2\n6 0 7\n", 5);
  ASSERT_EQ(s.irt.size(), 1u);
  EXPECT_EQ(s.irt[0], (Triplet{3, 0, 4}));
  EXPECT_EQ(s.iri.size(), 1u);
  EXPECT_EQ(s.trt.size(), 1u);
  EXPECT_EQ(s.trt[0], (Triplet{1, 0, 2}));
}

TEST(Kg, ReorientsTagItemRowsWithInverseRelation) {
  // Four raw relations; (tag 9, r 2, item 3) becomes (3, 2 + 4, 9).
  const auto s = kg_of("9 2 3\n0 3 1\n", 5);
  EXPECT_EQ(s.n_relations_raw, 4u);
  EXPECT_EQ(s.n_relations_aug, 8u);
  ASSERT_EQ(s.irt.size(), 1u);
  EXPECT_EQ(s.irt[0], (Triplet{3, 6, 4}));
  EXPECT_EQ(s.reoriented, 1u);
}

TEST(Kg, CountsAddUpToLines) {
  const auto s = kg_of("0 0 1\n5 0 1\n1 1 6\n7 2 8\n6 0 2\n", 5);
  EXPECT_EQ(s.size(), s.kg_lines);
  EXPECT_EQ(s.iri.size() + s.trt.size() + s.irt.size(), 5u);
}

TEST(Kg, DeduplicatesAndRejectsBadLines) {
  const auto s = kg_of("0 0 1\n0 0 1\n", 5);
  EXPECT_EQ(s.iri.size(), 1u);
  EXPECT_EQ(s.duplicates_dropped, 1u);
  EXPECT_THROW(kg_of("0 1\n", 5), ParseError);
  std::istringstream in("0 0 12\n");
  EXPECT_THROW(parse_kg(in, 5, 10), RangeError);
}

TEST(Concepts, SortedByRelationThenTag) {
  // Item 0: (0, r1, tag 1) and (0, r0, tag 2); item 1 only in item-item rows.
  const auto s = kg_of("0 1 6\n0 0 7\n1 0 2\n", 5);
  const ConceptIndex idx(s);
  const auto c = idx.concepts_of(0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (Concept{0, 2}));
  EXPECT_EQ(c[1], (Concept{1, 1}));
  EXPECT_TRUE(idx.concepts_of(1).empty());
  EXPECT_TRUE(idx.concepts_of(3).empty());
  EXPECT_THROW(idx.concepts_of(5), RangeError);
}

TEST(Concepts, InvertedIndexRoundTrip) {
  const Dataset ds = testing::toy_dataset();
  std::size_t pairs = 0;
  for (Id i = 0; i < ds.n_items(); ++i) {
    for (const Concept& c : ds.concepts.concepts_of(i)) {
      const auto items = ds.concepts.items_of(c);
      EXPECT_TRUE(std::binary_search(items.begin(), items.end(), i));
      ++pairs;
    }
  }
  EXPECT_EQ(pairs, ds.kg.irt.size());
  EXPECT_EQ(ds.concepts.items_with_concepts(), (std::vector<Id>{0, 1, 2, 3, 4}));
}

TEST(Dataset, ToyCounts) {
  const Dataset ds = testing::toy_dataset();
  EXPECT_EQ(ds.n_items(), 6u);
  EXPECT_EQ(ds.n_tags(), 4u);
  EXPECT_EQ(ds.n_relations(), 8u);
  EXPECT_EQ(ds.kg.iri.size(), 2u);
  EXPECT_EQ(ds.kg.trt.size(), 2u);
  EXPECT_EQ(ds.kg.irt.size(), 9u);
  const auto heads = ds.answers.heads(TripletType::IRT, 2, 0);
  EXPECT_EQ(std::vector<Id>(heads.begin(), heads.end()), (std::vector<Id>{0, 1}));
}

class DatasetDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("inbox_kg_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  void write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
  }
  std::filesystem::path dir_;
};

TEST_F(DatasetDir, LoadsAndHonoursItemList) {
  write("train.txt", "0 0 1\n1 2\n");
  write("test.txt", "0 2\n");
  write("kg_final.txt", "0 0 5\n");
  write("item_list.txt", "org_id remap_id\na 0\nb 1\nc 2\nd 3\n");
  const Dataset ds = load_dataset(dir_);
  EXPECT_EQ(ds.n_items(), 4u);
  EXPECT_EQ(ds.n_tags(), 2u);  // entity 5 is tag 1
  EXPECT_EQ(ds.kg.irt.size(), 1u);
}

TEST_F(DatasetDir, MissingFileNamesThePath) {
  write("train.txt", "0 1\n");
  write("test.txt", "");
  try {
    load_dataset(dir_);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("kg_final.txt"), std::string::npos);
  }
}

TEST_F(DatasetDir, ShortItemListRejected) {
  write("train.txt", "0 0 3\n");
  write("test.txt", "");
  write("kg_final.txt", "");
  write("item_list.txt", "header\nx\n");
  EXPECT_THROW(load_dataset(dir_), DataError);
}

TEST(Manifest, RoundTripAndCompare) {
  const Dataset ds = testing::toy_dataset();
  const DatasetManifest m = make_manifest(ds);
  EXPECT_EQ(m.n_users, 3u);
  EXPECT_EQ(m.n_interactions, m.n_train_interactions + m.n_test_interactions);
  EXPECT_EQ(m.kg_triplets, 13u);
  std::stringstream io;
  write_manifest(m, io);
  EXPECT_EQ(read_manifest(io), m);

  EXPECT_TRUE(compare_manifest({{"n_users", "3"}, {"n_irt", "9"}}, m).empty());
  const auto diff = compare_manifest({{"n_users", "4"}}, m);
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_NE(diff[0].find("n_users"), std::string::npos);
}

TEST(Manifest, TripletSharesFromPublishedCounts) {
  // Alibaba-iFashion: 173,690 tag-tag and 105,465 item-tag triplets.
  DatasetManifest m;
  m.n_iri = 0;
  m.n_trt = 173690;
  m.n_irt = 105465;
  m.kg_triplets = m.n_iri + m.n_trt + m.n_irt;
  EXPECT_NEAR(m.share(TripletType::TRT), 62.22, 0.005);
  EXPECT_NEAR(m.share(TripletType::IRT), 37.78, 0.005);
  EXPECT_EQ(m.share(TripletType::IRI), 0.0);
}

}  // namespace
}  // namespace inbox
