#include "inbox/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "inbox/errors.hpp"

namespace inbox {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string fmt_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

[[noreturn]] void corrupt(const std::string& why) {
  throw CorruptCheckpointError("corrupt checkpoint: " + why);
}

std::uint64_t parse_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) corrupt("missing header key '" + key + "'");
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) corrupt("bad value for '" + key + "'");
  return v;
}

const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) corrupt("missing header key '" + key + "'");
  return it->second;
}

ParamTables shaped_tables(const ModelDims& d, std::size_t attn, std::size_t user) {
  ParamTables p;
  p.items = Table(d.n_items, d.dim);
  p.tags = Table(d.n_tags, 2 * d.dim);
  p.relations = Table(d.n_relations, 2 * d.dim);
  p.users = Table(d.n_users, d.dim);
  p.attn_net.assign(attn, 0.0);
  p.user_net.assign(user, 0.0);
  return p;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& s = ckpt.store;
  const bool has_opt = ckpt.optimizer.has_value();
  const std::size_t n_values = s.params.size();
  const std::size_t payload = n_values * 4 + (has_opt ? 2 * n_values * 8 : 0);

  std::ostringstream h;
  h << kCheckpointMagic << '\n'
    << "n_items " << s.dims.n_items << '\n'
    << "n_tags " << s.dims.n_tags << '\n'
    << "n_relations " << s.dims.n_relations << '\n'
    << "n_users " << s.dims.n_users << '\n'
    << "dim " << s.dims.dim << '\n'
    << "margin " << fmt_double(s.margin) << '\n'
    << "seed " << s.seed << '\n'
    << "stage_completed " << s.stage_completed << '\n'
    << "net_hidden_layers " << s.net.hidden_layers << '\n'
    << "net_hidden_width " << s.net.hidden_width << '\n'
    << "net_activation " << to_string(s.net.activation) << '\n'
    << "intersection " << to_string(ckpt.interest.variant) << '\n'
    << "combine " << to_string(ckpt.interest.combine) << '\n'
    << "history_cap " << ckpt.interest.history_cap << '\n'
    << "attn_net_size " << s.params.attn_net.size() << '\n'
    << "user_net_size " << s.params.user_net.size() << '\n'
    << "optimizer_state " << (has_opt ? 1 : 0) << '\n'
    << "optimizer_step " << (has_opt ? ckpt.optimizer->step : 0) << '\n'
    << "payload_bytes " << payload << '\n'
    << "end\n";

  std::string out = h.str();
  out.reserve(out.size() + payload + 4);
  s.params.for_each([&out](const char*, ConstSpan a) {
    for (double x : a) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  });
  if (has_opt) {
    for (const ParamTables* t : {&ckpt.optimizer->m, &ckpt.optimizer->v}) {
      if (t->size() != n_values) throw ContractError("checkpoint: optimizer state shape mismatch");
      t->for_each([&out](const char*, ConstSpan a) {
        for (double x : a) put_u64(out, std::bit_cast<std::uint64_t>(x));
      });
    }
  }
  put_u32(out, crc_of(out));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4) corrupt("file too short");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t stored_crc = get_u32(raw + bytes.size() - 4);
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc_of(body) != stored_crc) corrupt("checksum mismatch");

  const std::string magic_line = std::string(kCheckpointMagic) + "\n";
  if (body.substr(0, magic_line.size()) != magic_line) corrupt("bad magic");
  const auto end_pos = body.find("\nend\n");
  if (end_pos == std::string_view::npos) corrupt("header not terminated");
  const std::size_t header_len = end_pos + 5;

  std::map<std::string, std::string> kv;
  std::istringstream hs(std::string(body.substr(magic_line.size(), end_pos - magic_line.size())));
  std::string line;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string k, v, extra;
    if (!(ls >> k >> v) || (ls >> extra)) corrupt("malformed header line '" + line + "'");
    kv[k] = v;
  }

  Checkpoint c;
  auto& s = c.store;
  try {
    s.dims.n_items = parse_u64(kv, "n_items");
    s.dims.n_tags = parse_u64(kv, "n_tags");
    s.dims.n_relations = parse_u64(kv, "n_relations");
    s.dims.n_users = parse_u64(kv, "n_users");
    s.dims.dim = parse_u64(kv, "dim");
    const auto& m = get(kv, "margin");
    auto [ptr, ec] = std::from_chars(m.data(), m.data() + m.size(), s.margin);
    if (ec != std::errc() || ptr != m.data() + m.size() || !std::isfinite(s.margin)) {
      corrupt("bad margin");
    }
    s.seed = parse_u64(kv, "seed");
    s.stage_completed = static_cast<int>(parse_u64(kv, "stage_completed"));
    s.net.hidden_layers = parse_u64(kv, "net_hidden_layers");
    s.net.hidden_width = parse_u64(kv, "net_hidden_width");
    s.net.activation = parse_activation(get(kv, "net_activation"));
    c.interest.variant = parse_variant(get(kv, "intersection"));
    c.interest.combine = parse_combine(get(kv, "combine"));
    c.interest.history_cap = parse_u64(kv, "history_cap");
  } catch (const ConfigError& e) {
    corrupt(e.what());
  }
  if (s.dims.dim == 0 || s.stage_completed > 3) corrupt("implausible header values");

  const auto layout = s.layout();
  const std::size_t attn = parse_u64(kv, "attn_net_size");
  const std::size_t user = parse_u64(kv, "user_net_size");
  if (attn != layout.attn_size() || user != layout.user_size()) {
    corrupt("network sizes disagree with the declared architecture");
  }
  const bool has_opt = parse_u64(kv, "optimizer_state") != 0;
  s.params = shaped_tables(s.dims, attn, user);
  const std::size_t n_values = s.params.size();
  const std::size_t expected = n_values * 4 + (has_opt ? 2 * n_values * 8 : 0);
  if (parse_u64(kv, "payload_bytes") != expected) corrupt("payload size disagrees with header");
  if (body.size() - header_len != expected) {
    corrupt("payload length " + std::to_string(body.size() - header_len) + " != expected " +
            std::to_string(expected));
  }

  const unsigned char* p = raw + header_len;
  bool finite = true;
  s.params.for_each([&](const char*, MutSpan a) {
    for (double& x : a) {
      x = static_cast<double>(std::bit_cast<float>(get_u32(p)));
      finite = finite && std::isfinite(x);
      p += 4;
    }
  });
  if (has_opt) {
    OptimizerState opt;
    opt.step = parse_u64(kv, "optimizer_step");
    opt.m = shaped_tables(s.dims, attn, user);
    opt.v = shaped_tables(s.dims, attn, user);
    for (ParamTables* t : {&opt.m, &opt.v}) {
      t->for_each([&](const char*, MutSpan a) {
        for (double& x : a) {
          x = std::bit_cast<double>(get_u64(p));
          finite = finite && std::isfinite(x);
          p += 8;
        }
      });
    }
    c.optimizer = std::move(opt);
  }
  if (!finite) corrupt("non-finite parameter values");
  return c;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace inbox
