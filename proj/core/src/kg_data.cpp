#include "inbox/kg_data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/log.hpp"

namespace inbox {
namespace {

// Splits on ASCII whitespace and parses each token as a non-negative integer.
std::vector<std::uint64_t> parse_ids(const std::string& line, std::size_t line_no) {
  std::vector<std::uint64_t> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == '\n')) ++p;
    if (p == end) break;
    const char* tok = p;
    while (p < end && !(*p == ' ' || *p == '\t' || *p == '\r' || *p == '\n')) ++p;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok, p, v);
    if (ec != std::errc() || ptr != p) {
      throw ParseError("malformed id token '" + std::string(tok, p) + "'", line_no);
    }
    if (v > UINT32_MAX) throw RangeError("id " + std::string(tok, p) + " exceeds 32-bit range");
    out.push_back(v);
  }
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

struct SplitParse {
  std::vector<std::vector<Id>> order;  // first-appearance order, deduplicated
  std::size_t duplicates = 0;
  std::uint64_t max_user = 0;
  std::uint64_t max_item = 0;
  bool any_user = false;
  bool any_item = false;
};

SplitParse parse_split(std::istream& in) {
  SplitParse out;
  std::vector<std::vector<Id>> sorted;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto ids = parse_ids(line, line_no);
    if (ids.empty()) continue;
    const auto user = ids[0];
    out.any_user = true;
    out.max_user = std::max(out.max_user, user);
    if (out.order.size() <= user) {
      out.order.resize(user + 1);
      sorted.resize(user + 1);
    }
    auto& hist = out.order[user];
    auto& seen = sorted[user];
    for (std::size_t k = 1; k < ids.size(); ++k) {
      const Id item = static_cast<Id>(ids[k]);
      out.any_item = true;
      out.max_item = std::max<std::uint64_t>(out.max_item, item);
      auto it = std::lower_bound(seen.begin(), seen.end(), item);
      if (it != seen.end() && *it == item) {
        ++out.duplicates;
        continue;
      }
      seen.insert(it, item);
      hist.push_back(item);
    }
  }
  return out;
}

}  // namespace

std::size_t InteractionGraph::n_train_pairs() const {
  std::size_t n = 0;
  for (const auto& v : train) n += v.size();
  return n;
}

std::size_t InteractionGraph::n_test_pairs() const {
  std::size_t n = 0;
  for (const auto& v : test) n += v.size();
  return n;
}

bool InteractionGraph::in_train(Id user, Id item) const {
  if (user >= train.size()) return false;
  const auto& v = train[user];
  return std::binary_search(v.begin(), v.end(), item);
}

InteractionGraph parse_interactions(std::istream& train, std::istream& test) {
  auto tr = parse_split(train);
  auto te = parse_split(test);

  InteractionGraph g;
  if (tr.any_user || te.any_user) {
    g.n_users = 1 + std::max(tr.any_user ? tr.max_user : 0, te.any_user ? te.max_user : 0);
  }
  if (tr.any_item || te.any_item) {
    g.n_items = 1 + std::max(tr.any_item ? tr.max_item : 0, te.any_item ? te.max_item : 0);
  }
  tr.order.resize(g.n_users);
  te.order.resize(g.n_users);
  g.train_history = std::move(tr.order);
  g.train.resize(g.n_users);
  g.test.resize(g.n_users);
  for (std::size_t u = 0; u < g.n_users; ++u) {
    g.train[u] = g.train_history[u];
    std::sort(g.train[u].begin(), g.train[u].end());
    g.test[u] = std::move(te.order[u]);
    std::sort(g.test[u].begin(), g.test[u].end());
  }
  g.duplicates_dropped = tr.duplicates + te.duplicates;
  if (g.duplicates_dropped > 0) {
    log_info("interactions: dropped " + std::to_string(g.duplicates_dropped) +
             " duplicate (user, item) pairs");
  }
  return g;
}

InteractionGraph load_interactions(const std::filesystem::path& train,
                                   const std::filesystem::path& test) {
  auto tr = open_or_throw(train);
  auto te = open_or_throw(test);
  return parse_interactions(tr, te);
}

const char* to_string(TripletType t) {
  switch (t) {
    case TripletType::IRI: return "IRI";
    case TripletType::TRT: return "TRT";
    case TripletType::IRT: return "IRT";
  }
  return "?";
}

const std::vector<Triplet>& TypedTripletStore::of(TripletType t) const {
  switch (t) {
    case TripletType::IRI: return iri;
    case TripletType::TRT: return trt;
    case TripletType::IRT: break;
  }
  return irt;
}

TypedTripletStore parse_kg(std::istream& kg, std::size_t n_items,
                           std::optional<std::size_t> max_entities) {
  std::vector<Triplet> raw;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t max_entity = 0;
  std::uint64_t max_relation = 0;
  bool any = false;
  while (std::getline(kg, line)) {
    ++line_no;
    auto ids = parse_ids(line, line_no);
    if (ids.empty()) continue;
    if (ids.size() != 3) {
      throw ParseError("expected 'head relation tail', got " + std::to_string(ids.size()) +
                           " tokens",
                       line_no);
    }
    for (auto e : {ids[0], ids[2]}) {
      if (max_entities && e >= *max_entities) {
        throw RangeError("entity id " + std::to_string(e) + " on line " +
                         std::to_string(line_no) + " exceeds declared entity count " +
                         std::to_string(*max_entities));
      }
      max_entity = std::max(max_entity, e);
    }
    max_relation = std::max(max_relation, ids[1]);
    any = true;
    raw.push_back({static_cast<Id>(ids[0]), static_cast<Id>(ids[1]), static_cast<Id>(ids[2])});
  }

  TypedTripletStore s;
  s.n_items = n_items;
  s.kg_lines = raw.size();
  if (max_entities) {
    s.n_tags = *max_entities > n_items ? *max_entities - n_items : 0;
  } else if (any && max_entity >= n_items) {
    s.n_tags = static_cast<std::size_t>(max_entity) + 1 - n_items;
  }
  s.n_relations_raw = any ? static_cast<std::size_t>(max_relation) + 1 : 0;
  s.n_relations_aug = 2 * s.n_relations_raw;

  std::sort(raw.begin(), raw.end());
  const auto last = std::unique(raw.begin(), raw.end());
  s.duplicates_dropped = static_cast<std::size_t>(raw.end() - last);
  raw.erase(last, raw.end());
  if (s.duplicates_dropped > 0) {
    log_info("kg: dropped " + std::to_string(s.duplicates_dropped) + " duplicate triplets");
  }

  const auto item = [n_items](Id e) { return e < n_items; };
  const auto tag = [n_items](Id e) { return static_cast<Id>(e - n_items); };
  for (const auto& t : raw) {
    const bool hi = item(t.head);
    const bool ti = item(t.tail);
    if (hi && ti) {
      s.iri.push_back(t);
    } else if (!hi && !ti) {
      s.trt.push_back({tag(t.head), t.relation, tag(t.tail)});
    } else if (hi) {
      s.irt.push_back({t.head, t.relation, tag(t.tail)});
    } else {
      s.irt.push_back({t.tail, s.inverse(t.relation), tag(t.head)});
      ++s.reoriented;
    }
  }
  return s;
}

TypedTripletStore load_kg(const std::filesystem::path& kg, std::size_t n_items,
                          std::optional<std::size_t> max_entities) {
  auto in = open_or_throw(kg);
  return parse_kg(in, n_items, max_entities);
}

ConceptIndex::ConceptIndex(const TypedTripletStore& store) : per_item_(store.n_items) {
  for (const auto& t : store.irt) {
    if (t.head >= per_item_.size()) per_item_.resize(t.head + 1);
    per_item_[t.head].push_back({t.relation, t.tail});
    concept_items_[key({t.relation, t.tail})].push_back(t.head);
  }
  for (auto& v : per_item_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  for (auto& [k, v] : concept_items_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

std::span<const Concept> ConceptIndex::concepts_of(Id item) const {
  if (item >= per_item_.size()) {
    throw RangeError("concepts_of: item " + std::to_string(item) + " out of range [0, " +
                     std::to_string(per_item_.size()) + ")");
  }
  return per_item_[item];
}

std::span<const Id> ConceptIndex::items_of(Concept c) const {
  auto it = concept_items_.find(key(c));
  if (it == concept_items_.end()) return {};
  return it->second;
}

std::vector<Id> ConceptIndex::items_with_concepts() const {
  std::vector<Id> out;
  for (std::size_t i = 0; i < per_item_.size(); ++i) {
    if (!per_item_[i].empty()) out.push_back(static_cast<Id>(i));
  }
  return out;
}

AnswerIndex::AnswerIndex(const TypedTripletStore& store) {
  const TripletType types[] = {TripletType::IRI, TripletType::TRT, TripletType::IRT};
  for (auto type : types) {
    auto& m = heads_[static_cast<int>(type)];
    for (const auto& t : store.of(type)) m[key(t.relation, t.tail)].push_back(t.head);
  }
  for (const auto& t : store.irt) irt_tags_[key(t.head, t.relation)].push_back(t.tail);
  const auto finish = [](Map& m) {
    for (auto& [k, v] : m) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  };
  for (auto& m : heads_) finish(m);
  finish(irt_tags_);
}

std::span<const Id> AnswerIndex::find(const Map& m, std::uint64_t k) {
  auto it = m.find(k);
  if (it == m.end()) return {};
  return it->second;
}

std::span<const Id> AnswerIndex::heads(TripletType type, Id relation, Id tail) const {
  return find(heads_[static_cast<int>(type)], key(relation, tail));
}

std::span<const Id> AnswerIndex::irt_tags(Id item, Id relation) const {
  return find(irt_tags_, key(item, relation));
}

Dataset make_dataset(InteractionGraph graph, TypedTripletStore kg) {
  if (kg.n_items != graph.n_items) {
    throw ContractError("make_dataset: kg parsed with n_items=" + std::to_string(kg.n_items) +
                        " but interactions have n_items=" + std::to_string(graph.n_items));
  }
  Dataset ds;
  ds.graph = std::move(graph);
  ds.kg = std::move(kg);
  ds.concepts = ConceptIndex(ds.kg);
  ds.answers = AnswerIndex(ds.kg);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto train = dir / "train.txt";
  const auto test = dir / "test.txt";
  const auto kg = dir / "kg_final.txt";
  for (const auto& p : {train, test, kg}) {
    if (!std::filesystem::exists(p)) throw DataError("missing dataset file '" + p.string() + "'");
  }
  auto graph = load_interactions(train, test);
  // The optional item list (one header line, then one row per item) fixes
  // the item count when the highest item ids never occur in interactions.
  if (const auto list = dir / "item_list.txt"; std::filesystem::exists(list)) {
    std::ifstream in(list);
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) ++rows;
    }
    if (rows < graph.n_items) {
      throw DataError("item_list.txt lists " + std::to_string(rows) +
                      " items but interactions reference " + std::to_string(graph.n_items));
    }
    graph.n_items = rows;
  }
  auto store = load_kg(kg, graph.n_items);
  return make_dataset(std::move(graph), std::move(store));
}

double DatasetManifest::share(TripletType t) const {
  const auto total = n_iri + n_trt + n_irt;
  if (total == 0) return 0.0;
  const auto n = t == TripletType::IRI ? n_iri : (t == TripletType::TRT ? n_trt : n_irt);
  return 100.0 * static_cast<double>(n) / static_cast<double>(total);
}

DatasetManifest make_manifest(const Dataset& ds) {
  DatasetManifest m;
  m.n_users = ds.graph.n_users;
  m.n_items = ds.graph.n_items;
  m.n_tags = ds.kg.n_tags;
  m.n_relations_raw = ds.kg.n_relations_raw;
  m.n_relations_aug = ds.kg.n_relations_aug;
  m.n_train_interactions = ds.graph.n_train_pairs();
  m.n_test_interactions = ds.graph.n_test_pairs();
  m.n_interactions = m.n_train_interactions + m.n_test_interactions;
  m.n_iri = ds.kg.iri.size();
  m.n_trt = ds.kg.trt.size();
  m.n_irt = ds.kg.irt.size();
  m.kg_triplets = ds.kg.size();
  return m;
}

std::map<std::string, std::string> manifest_fields(const DatasetManifest& m) {
  return {
      {"n_users", std::to_string(m.n_users)},
      {"n_items", std::to_string(m.n_items)},
      {"n_tags", std::to_string(m.n_tags)},
      {"n_relations_raw", std::to_string(m.n_relations_raw)},
      {"n_relations_aug", std::to_string(m.n_relations_aug)},
      {"n_train_interactions", std::to_string(m.n_train_interactions)},
      {"n_test_interactions", std::to_string(m.n_test_interactions)},
      {"n_interactions", std::to_string(m.n_interactions)},
      {"n_iri", std::to_string(m.n_iri)},
      {"n_trt", std::to_string(m.n_trt)},
      {"n_irt", std::to_string(m.n_irt)},
      {"kg_triplets", std::to_string(m.kg_triplets)},
      {"entity_layout", m.entity_layout},
  };
}

void write_manifest(const DatasetManifest& m, std::ostream& out) {
  static const char* order[] = {"n_users",         "n_items",
                                "n_tags",          "n_relations_raw",
                                "n_relations_aug", "n_train_interactions",
                                "n_test_interactions", "n_interactions",
                                "n_iri",           "n_trt",
                                "n_irt",           "kg_triplets",
                                "entity_layout"};
  const auto fields = manifest_fields(m);
  out << "# inbox dataset manifest\n";
  for (const char* k : order) out << k << ' ' << fields.at(k) << '\n';
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  write_manifest(m, out);
}

std::map<std::string, std::string> read_manifest_fields(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string key, value, extra;
    if (!(ss >> key >> value) || (ss >> extra)) {
      throw ParseError("manifest lines must be 'key value'", line_no);
    }
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_manifest_fields(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_manifest_fields(in);
}

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest m;
  const auto fields = read_manifest_fields(in);
  const auto num = [&](const std::string& k, std::size_t& dst) {
    auto it = fields.find(k);
    if (it == fields.end()) return;
    auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), dst);
    if (ec != std::errc() || ptr != it->second.data() + it->second.size()) {
      throw ParseError("manifest key '" + k + "' is not a count", 0);
    }
  };
  const auto known = manifest_fields(m);
  for (const auto& [k, v] : fields) {
    if (!known.contains(k)) throw ParseError("unknown manifest key '" + k + "'", 0);
  }
  num("n_users", m.n_users);
  num("n_items", m.n_items);
  num("n_tags", m.n_tags);
  num("n_relations_raw", m.n_relations_raw);
  num("n_relations_aug", m.n_relations_aug);
  num("n_train_interactions", m.n_train_interactions);
  num("n_test_interactions", m.n_test_interactions);
  num("n_interactions", m.n_interactions);
  num("n_iri", m.n_iri);
  num("n_trt", m.n_trt);
  num("n_irt", m.n_irt);
  num("kg_triplets", m.kg_triplets);
  if (auto it = fields.find("entity_layout"); it != fields.end()) m.entity_layout = it->second;
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_manifest(in);
}

std::vector<std::string> compare_manifest(const std::map<std::string, std::string>& expected,
                                          const DatasetManifest& actual) {
  std::vector<std::string> out;
  const auto have = manifest_fields(actual);
  for (const auto& [k, v] : expected) {
    auto it = have.find(k);
    if (it == have.end()) {
      out.push_back(k + ": unknown manifest key");
    } else if (it->second != v) {
      out.push_back(k + ": expected " + v + ", got " + it->second);
    }
  }
  return out;
}

}  // namespace inbox
