#pragma once

// Checkpoint file layout ("INBOX1"):
//
//   INBOX1\n
//   <key> <value>\n ...            counts, dim, margin, seed, stage, net and
//                                  interest configuration, payload size
//   end\n
//   payload                        little-endian float32 arrays: items, tags,
//                                  relations, users, attn_net, user_net;
//                                  then, when optimizer_state is 1, float64
//                                  first moments followed by second moments
//                                  in the same order
//   crc32                          4 bytes little-endian over everything above
//
// Loading never returns a partially filled store: any inconsistency raises
// CorruptCheckpointError.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "inbox/model.hpp"

namespace inbox {

inline constexpr std::string_view kCheckpointMagic = "INBOX1";

struct OptimizerState {
  std::uint64_t step = 0;
  ParamTables m;
  ParamTables v;
  bool operator==(const OptimizerState&) const = default;
};

struct Checkpoint {
  ParamStore store;
  InterestConfig interest;
  std::optional<OptimizerState> optimizer;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

// Written through a temporary file and renamed into place.
void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace inbox
