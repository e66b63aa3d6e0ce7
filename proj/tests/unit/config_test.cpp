#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <sstream>

#include "inbox/config.hpp"
#include "inbox/errors.hpp"

namespace inbox {
namespace {

TEST(KeyValues, ParsesCommentsAndBlankLines) {
  std::istringstream in("# comment\n\n dim = 32 \nlr_milestones = 0.5, 0.75\n");
  const auto kv = parse_key_values(in);
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("dim"), "32");
  EXPECT_EQ(kv.at("lr_milestones"), "0.5, 0.75");
}

TEST(KeyValues, RepeatedKeyAndMalformedLineRejected) {
  std::istringstream twice("dim = 3\ndim = 4\n");
  EXPECT_THROW(parse_key_values(twice), ParseError);
  std::istringstream junk("dim 3\n");
  EXPECT_THROW(parse_key_values(junk), ParseError);
}

TEST(RunConfig, UnknownKeyAndBadValueRejected) {
  RunConfig cfg;
  EXPECT_THROW(apply_key_values({{"dimm", "3"}}, cfg), ConfigError);
  EXPECT_THROW(apply_key_values({{"dim", "three"}}, cfg), ConfigError);
  EXPECT_THROW(apply_key_values({{"pretrain", "maybe"}}, cfg), ConfigError);
}

TEST(RunConfig, AppliesOverrides) {
  RunConfig cfg;
  apply_key_values({{"dim", "16"}, {"pretrain", "false"}, {"lr_milestones", "0.25,0.5"}}, cfg);
  EXPECT_EQ(cfg.train.dim, 16u);
  EXPECT_FALSE(cfg.train.pretrain);
  EXPECT_EQ(cfg.train.lr_milestones, (std::vector<double>{0.25, 0.5}));
}

TEST(RunConfig, EveryKeyRoundTrips) {
  RunConfig cfg;
  cfg.train.dim = 24;
  cfg.train.base_lr = 0.0123456789012345;
  cfg.train.margin = 7.5;
  cfg.train.seed = 0xFFFFFFFFFFFFull;
  cfg.train.interest.variant = IntersectionVariant::MaxMin;
  cfg.train.interest.combine = CombineMode::ItemOnly;
  cfg.train.literal_loss = true;
  cfg.dataset = "data/x";
  cfg.out_dir = "runs/y";
  const auto kv = to_key_values(cfg);
  EXPECT_EQ(kv.size(), config_keys().size());

  const auto path = std::filesystem::temp_directory_path() /
                    ("inbox_cfg_" + std::to_string(::getpid()) + ".txt");
  write_run_config(cfg, path);
  const RunConfig back = load_run_config(path);
  EXPECT_EQ(to_key_values(back), kv);
  EXPECT_EQ(back.train.base_lr, cfg.train.base_lr);
  EXPECT_EQ(back.train.seed, cfg.train.seed);
  std::filesystem::remove(path);
}

TEST(RunConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_run_config("/nonexistent/inbox.cfg"), ConfigError);
}

}  // namespace
}  // namespace inbox
