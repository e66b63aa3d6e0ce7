#include <gtest/gtest.h>

#include <unistd.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "inbox/checkpoint.hpp"
#include "inbox/errors.hpp"
#include "properties.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("inbox_ckpt_" + std::to_string(::getpid()) + "_" + name);
}

Checkpoint toy(bool with_optimizer) {
  const Dataset ds = testing::toy_dataset();
  Checkpoint ck;
  ck.store = testing::toy_store(ds, 4, 12);
  ck.store.stage_completed = 1;
  ck.interest.variant = IntersectionVariant::MaxMin;
  ck.interest.history_cap = 9;
  if (with_optimizer) {
    OptimizerState opt;
    opt.step = 3;
    opt.m = zeros_like(ck.store.params);
    opt.v = zeros_like(ck.store.params);
    opt.m.items.row(2)[1] = -0.125;
    opt.v.users.row(0)[3] = 1e-300;
    ck.optimizer = opt;
  }
  return ck;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto r = testing::checkpoint_round_trip(5);
  EXPECT_EQ(r.violations, 0u) << r.first_failure;
}

TEST(Checkpoint, FileRoundTripWithAndWithoutOptimizer) {
  for (bool opt : {false, true}) {
    const Checkpoint ck = toy(opt);
    const auto path = temp_path(opt ? "opt" : "plain");
    checkpoint_save(ck, path);
    const Checkpoint back = checkpoint_load(path);
    EXPECT_EQ(back.store.params, ck.store.params);
    EXPECT_EQ(back.interest, ck.interest);
    EXPECT_EQ(back.optimizer.has_value(), opt);
    if (opt) EXPECT_EQ(*back.optimizer, *ck.optimizer);

    const auto again = temp_path(opt ? "opt2" : "plain2");
    checkpoint_save(back, again);
    std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove(path);
    std::filesystem::remove(again);
  }
}

TEST(Checkpoint, StartsWithMagicAndHeader) {
  const std::string bytes = serialize_checkpoint(toy(false));
  EXPECT_EQ(bytes.rfind("INBOX1\n", 0), 0u);
  EXPECT_NE(bytes.find("\nstage_completed 1\n"), std::string::npos);
  EXPECT_NE(bytes.find("\nend\n"), std::string::npos);
}

TEST(Checkpoint, FuzzedCorruptionRejected) {
  const auto r = testing::checkpoint_fuzz(100, 100, 77);
  EXPECT_EQ(r.cases, 200u);
  EXPECT_EQ(r.violations, 0u) << r.first_failure;
}

// Header counts that disagree with the payload are caught even when the
// checksum is recomputed to match.
TEST(Checkpoint, HeaderPayloadMismatchRejected) {
  std::string bytes = serialize_checkpoint(toy(false));
  const auto pos = bytes.find("\nn_users 3\n");
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, 11, "\nn_users 4\n");
  const std::size_t body = bytes.size() - 4;
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(body));
  for (int i = 0; i < 4; ++i) bytes[body + i] = static_cast<char>((crc >> (8 * i)) & 0xFF);
  EXPECT_THROW(parse_checkpoint(bytes), CorruptCheckpointError);
}

TEST(Checkpoint, MissingFileThrows) {
  EXPECT_THROW(checkpoint_load(temp_path("does_not_exist")), DataError);
}

}  // namespace
}  // namespace inbox
