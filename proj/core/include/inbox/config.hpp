#pragma once

// Run configuration as flat "key = value" text. Blank lines and lines
// starting with '#' are ignored; lists are comma separated; booleans are
// true/false. Unknown keys are rejected so typos do not pass silently.

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "inbox/training.hpp"

namespace inbox {

using KeyValues = std::map<std::string, std::string>;

// Throws ParseError for malformed lines or repeated keys.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

struct RunConfig {
  TrainConfig train;
  std::string dataset;
  std::string out_dir;
  bool deterministic = false;
};

// Overrides the fields named in kv. Throws ConfigError for unknown keys or
// unparsable values.
void apply_key_values(const KeyValues& kv, RunConfig& cfg);
// Every key with its current value; parsing it back reproduces cfg.
KeyValues to_key_values(const RunConfig& cfg);
std::vector<std::string> config_keys();

RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace inbox
