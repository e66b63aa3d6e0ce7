#include "inbox/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "inbox/errors.hpp"

namespace inbox {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

template <class T>
T parse_number(const std::string& key, const std::string& v, const char* want) {
  T x{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, want);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "boolean");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item), "number"));
  return out;
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class M>
Field size_field(const char* key, M member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.train.*member = parse_number<std::size_t>(k, v, "non-negative integer");
          },
          [member](const RunConfig& c) { return std::to_string(c.train.*member); }};
}

template <class M>
Field real_field(const char* key, M member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.train.*member = parse_number<double>(k, v, "number");
          },
          [member](const RunConfig& c) { return fmt(c.train.*member); }};
}

template <class M>
Field bool_field(const char* key, M member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.train.*member = parse_bool(k, v);
          },
          [member](const RunConfig& c) { return std::string(c.train.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"dataset", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; },
       [](const RunConfig& c) { return c.dataset; }},
      {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
      {"deterministic",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.deterministic = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.deterministic ? "true" : "false"); }},
      size_field("dim", &TrainConfig::dim),
      real_field("margin", &TrainConfig::margin),
      real_field("init_scale", &TrainConfig::init_scale),
      {"net_hidden_layers",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.net.hidden_layers = parse_number<std::size_t>(k, v, "non-negative integer");
       },
       [](const RunConfig& c) { return std::to_string(c.train.net.hidden_layers); }},
      {"net_hidden_width",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.net.hidden_width = parse_number<std::size_t>(k, v, "non-negative integer");
       },
       [](const RunConfig& c) { return std::to_string(c.train.net.hidden_width); }},
      {"net_activation",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.train.net.activation = parse_activation(v);
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.net.activation)); }},
      size_field("batch_size", &TrainConfig::batch_size),
      size_field("n_negatives", &TrainConfig::n_negatives),
      real_field("base_lr", &TrainConfig::base_lr),
      {"lr_milestones",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.lr_milestones = parse_list(k, v);
       },
       [](const RunConfig& c) { return fmt_list(c.train.lr_milestones); }},
      {"lr_factors",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.lr_factors = parse_list(k, v);
       },
       [](const RunConfig& c) { return fmt_list(c.train.lr_factors); }},
      size_field("epochs_pretrain", &TrainConfig::epochs_pretrain),
      size_field("epochs_intersection", &TrainConfig::epochs_intersection),
      size_field("epochs_recommendation", &TrainConfig::epochs_recommendation),
      real_field("alpha", &TrainConfig::alpha),
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.seed = parse_number<std::uint64_t>(k, v, "non-negative integer");
       },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      bool_field("pretrain", &TrainConfig::pretrain),
      bool_field("only_irt", &TrainConfig::only_irt),
      bool_field("intersection", &TrainConfig::intersection),
      {"intersection_variant",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.train.interest.variant = parse_variant(v);
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.interest.variant)); }},
      {"combine",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.train.interest.combine = parse_combine(v);
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.interest.combine)); }},
      {"history_cap",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.interest.history_cap = parse_number<std::size_t>(k, v, "non-negative integer");
       },
       [](const RunConfig& c) { return std::to_string(c.train.interest.history_cap); }},
      bool_field("literal_loss", &TrainConfig::literal_loss),
      bool_field("freeze_attention_in_recommendation",
                 &TrainConfig::freeze_attention_in_recommendation),
      real_field("clip_norm", &TrainConfig::clip_norm),
      real_field("validation_fraction", &TrainConfig::validation_fraction),
      size_field("patience", &TrainConfig::patience),
      size_field("eval_k", &TrainConfig::eval_k),
      size_field("eval_threads", &TrainConfig::eval_threads),
  };
  return f;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", n);
    if (!kv.emplace(key, trim(t.substr(eq + 1))).second) {
      throw ParseError("repeated key '" + key + "'", n);
    }
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_key_values(in);
}

std::string format_key_values(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

void apply_key_values(const KeyValues& kv, RunConfig& cfg) {
  for (const auto& [k, v] : kv) {
    const auto& fs = fields();
    auto it = std::find_if(fs.begin(), fs.end(), [&k](const Field& f) { return k == f.key; });
    if (it == fs.end()) throw ConfigError("unknown config key '" + k + "'");
    it->set(cfg, k, v);
  }
}

KeyValues to_key_values(const RunConfig& cfg) {
  KeyValues kv;
  for (const auto& f : fields()) kv[f.key] = f.get(cfg);
  return kv;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg;
  try {
    apply_key_values(read_key_values(path), cfg);
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

void write_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config '" + path.string() + "'");
  out << format_key_values(to_key_values(cfg));
}

}  // namespace inbox
