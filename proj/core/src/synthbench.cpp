#include "inbox/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "inbox/errors.hpp"
#include "inbox/log.hpp"
#include "inbox/rng.hpp"

namespace inbox {
namespace {

constexpr int kRegionRetries = 100;
constexpr int kPointRetries = 100;
constexpr std::size_t kMaxMemberships = 3;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid synthetic config: " + what);
}

PlantedBox intersect(const GroundTruth& gt, const std::vector<std::size_t>& members) {
  PlantedBox r{Vec(gt.d_true, -std::numeric_limits<double>::infinity()),
               Vec(gt.d_true, std::numeric_limits<double>::infinity())};
  for (std::size_t c : members) {
    for (std::size_t k = 0; k < gt.d_true; ++k) {
      r.lo[k] = std::max(r.lo[k], gt.concepts[c].lo[k]);
      r.hi[k] = std::min(r.hi[k], gt.concepts[c].hi[k]);
    }
  }
  return r;
}

bool non_empty(const PlantedBox& b) {
  for (std::size_t k = 0; k < b.lo.size(); ++k) {
    if (!(b.lo[k] < b.hi[k])) return false;
  }
  return true;
}

Vec point_in(const PlantedBox& b, Rng& rng) {
  Vec p(b.lo.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = rng.uniform(b.lo[k], b.hi[k]);
  return p;
}

std::vector<std::size_t> memberships(const GroundTruth& gt, const Vec& p) {
  std::vector<std::size_t> m;
  for (std::size_t c = 0; c < gt.concepts.size(); ++c) {
    if (gt.concepts[c].contains(p)) m.push_back(c);
  }
  return m;
}

std::vector<std::size_t> draw_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all.begin(), all.end());
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

void write_lines(std::ostringstream& out, const std::vector<std::vector<Id>>& per_user) {
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    out << u;
    for (Id i : per_user[u]) out << ' ' << i;
    out << '\n';
  }
}

}  // namespace

void SynthConfig::validate() const {
  require(n_concepts >= 1 && n_items >= 1 && n_users >= 1 && d_true >= 1, "counts must be >= 1");
  require(concepts_per_interest >= 1 && concepts_per_interest <= n_concepts,
          "concepts_per_interest must lie in [1, n_concepts]");
  require(concepts_per_interest <= kMaxMemberships, "concepts_per_interest must be <= 3");
  require(items_per_user >= 2, "items_per_user must be >= 2");
  require(n_relations >= 1, "n_relations must be >= 1");
  require(noise >= 0.0 && noise <= 1.0, "noise must lie in [0, 1]");
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  require(targeted_fraction > 0.0 && targeted_fraction <= 1.0,
          "targeted_fraction must lie in (0, 1]");
  require(min_half_width > 0.0 && min_half_width <= max_half_width, "half-width range");
}

bool PlantedBox::contains(std::span<const double> p) const {
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < lo[k] || p[k] > hi[k]) return false;
  }
  return true;
}

double PlantedBox::dist_out(std::span<const double> p) const {
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    d += std::max(p[k] - hi[k], 0.0) + std::max(lo[k] - p[k], 0.0);
  }
  return d;
}

double PlantedBox::dist_center(std::span<const double> p) const {
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - 0.5 * (lo[k] + hi[k]));
  return d;
}

Dataset SynthData::dataset() const {
  std::istringstream tr(train_txt), te(test_txt), kg(kg_txt);
  auto graph = parse_interactions(tr, te);
  graph.n_items = std::max(graph.n_items, truth.item_points.size());
  auto store = parse_kg(kg, graph.n_items);
  return make_dataset(std::move(graph), std::move(store));
}

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  GroundTruth gt;
  gt.d_true = cfg.d_true;

  for (std::size_t c = 0; c < cfg.n_concepts; ++c) {
    PlantedBox b{Vec(cfg.d_true), Vec(cfg.d_true)};
    for (std::size_t k = 0; k < cfg.d_true; ++k) {
      const double center = rng.uniform();
      const double half = rng.uniform(cfg.min_half_width, cfg.max_half_width);
      b.lo[k] = center - half;
      b.hi[k] = center + half;
    }
    gt.concepts.push_back(std::move(b));
    gt.concept_ids.push_back({static_cast<Id>(c % cfg.n_relations), static_cast<Id>(c)});
  }

  // Interest regions. An empty intersection is redrawn; after the retry
  // budget the region falls back to one concept fewer.
  const std::size_t n_targeted = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::round(cfg.targeted_fraction * static_cast<double>(cfg.n_items))));
  const std::size_t n_interests =
      std::clamp<std::size_t>(n_targeted / cfg.items_per_user, 1, cfg.n_users);
  for (std::size_t r = 0; r < n_interests; ++r) {
    std::size_t want = cfg.concepts_per_interest;
    for (;;) {
      bool found = false;
      for (int attempt = 0; attempt < kRegionRetries && !found; ++attempt) {
        auto members = draw_distinct(cfg.n_concepts, want, rng);
        auto region = intersect(gt, members);
        if (non_empty(region)) {
          gt.interests.push_back(std::move(members));
          gt.interest_regions.push_back(std::move(region));
          found = true;
        }
      }
      if (found) break;
      log_warn("synthbench: empty interest intersection, retrying with fewer concepts");
      --want;  // a single concept is never empty
    }
  }

  // Items: a shuffled prefix targets the interest regions round-robin.
  std::vector<std::size_t> order(cfg.n_items);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  gt.item_points.resize(cfg.n_items);
  gt.item_concepts.resize(cfg.n_items);
  for (std::size_t j = 0; j < cfg.n_items; ++j) {
    const std::size_t item = order[j];
    const bool targeted = j < n_targeted;
    const std::size_t single = targeted ? 0 : rng.below(cfg.n_concepts);
    const PlantedBox region = targeted ? gt.interest_regions[j % n_interests]
                                       : gt.concepts[single];
    Vec p;
    std::vector<std::size_t> m;
    for (int attempt = 0; attempt < kPointRetries; ++attempt) {
      p = point_in(region, rng);
      m = memberships(gt, p);
      if (m.size() <= kMaxMemberships) break;
    }
    gt.item_points[item] = std::move(p);
    gt.item_concepts[item] = std::move(m);
  }

  // Users share regions; each region's positives are split once.
  gt.user_interest.resize(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) gt.user_interest[u] = u % n_interests;
  rng.shuffle(gt.user_interest.begin(), gt.user_interest.end());

  std::vector<std::vector<Id>> region_train(n_interests), region_test(n_interests);
  for (std::size_t r = 0; r < n_interests; ++r) {
    std::vector<Id> pos;
    for (Id i = 0; i < cfg.n_items; ++i) {
      if (gt.interest_regions[r].contains(gt.item_points[i])) pos.push_back(i);
    }
    rng.shuffle(pos.begin(), pos.end());
    std::size_t n_test = static_cast<std::size_t>(
        std::round(cfg.test_fraction * static_cast<double>(pos.size())));
    if (pos.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, pos.size() - 1);
    else n_test = 0;
    region_test[r].assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_test));
    region_train[r].assign(pos.begin() + static_cast<std::ptrdiff_t>(n_test), pos.end());
  }

  std::vector<std::vector<Id>> train(cfg.n_users), test(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const std::size_t r = gt.user_interest[u];
    train[u] = region_train[r];
    test[u] = region_test[r];
    if (cfg.noise > 0.0) {
      // Replaced interactions land on items not yet used by this user.
      std::vector<Id> used = train[u];
      used.insert(used.end(), test[u].begin(), test[u].end());
      std::sort(used.begin(), used.end());
      for (auto* list : {&train[u], &test[u]}) {
        for (Id& i : *list) {
          if (!rng.bernoulli(cfg.noise) || used.size() >= cfg.n_items) continue;
          Id repl;
          do {
            repl = static_cast<Id>(rng.below(cfg.n_items));
          } while (std::binary_search(used.begin(), used.end(), repl));
          i = repl;
          used.insert(std::upper_bound(used.begin(), used.end(), repl), repl);
        }
      }
    }
  }

  SynthData out;
  std::ostringstream tr, te, kg;
  write_lines(tr, train);
  write_lines(te, test);
  const Id tag_base = static_cast<Id>(cfg.n_items);
  for (Id i = 0; i < cfg.n_items; ++i) {
    for (std::size_t c : gt.item_concepts[i]) {
      kg << i << ' ' << gt.concept_ids[c].relation << ' ' << tag_base + gt.concept_ids[c].tag
         << '\n';
    }
  }
  if (cfg.emit_trt && cfg.n_concepts >= 2) {
    // Each concept links to its nearest neighbour (L1 between box centers).
    const Id link = static_cast<Id>(cfg.n_relations);
    for (std::size_t a = 0; a < cfg.n_concepts; ++a) {
      std::size_t best = a;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < cfg.n_concepts; ++b) {
        if (b == a) continue;
        Vec cb(cfg.d_true);
        for (std::size_t k = 0; k < cfg.d_true; ++k) {
          cb[k] = 0.5 * (gt.concepts[b].lo[k] + gt.concepts[b].hi[k]);
        }
        const double d = gt.concepts[a].dist_center(cb);
        if (d < best_d) {
          best_d = d;
          best = b;
        }
      }
      kg << tag_base + gt.concept_ids[a].tag << ' ' << link << ' '
         << tag_base + gt.concept_ids[best].tag << '\n';
    }
  }
  out.train_txt = tr.str();
  out.test_txt = te.str();
  out.kg_txt = kg.str();
  out.truth = std::move(gt);
  return out;
}

std::string ground_truth_json(const GroundTruth& gt) {
  nlohmann::json j;
  j["d_true"] = gt.d_true;
  auto& concepts = j["concepts"] = nlohmann::json::array();
  for (std::size_t c = 0; c < gt.concepts.size(); ++c) {
    concepts.push_back({{"index", c},
                        {"relation", gt.concept_ids[c].relation},
                        {"tag", gt.concept_ids[c].tag},
                        {"lo", gt.concepts[c].lo},
                        {"hi", gt.concepts[c].hi}});
  }
  auto& interests = j["interests"] = nlohmann::json::array();
  for (std::size_t r = 0; r < gt.interests.size(); ++r) {
    interests.push_back({{"concepts", gt.interests[r]},
                         {"lo", gt.interest_regions[r].lo},
                         {"hi", gt.interest_regions[r].hi}});
  }
  j["user_interest"] = gt.user_interest;
  auto& items = j["items"] = nlohmann::json::array();
  for (std::size_t i = 0; i < gt.item_points.size(); ++i) {
    items.push_back({{"point", gt.item_points[i]}, {"concepts", gt.item_concepts[i]}});
  }
  return j.dump(1) + "\n";
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&dir](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + (dir / name).string() + "'");
    out << text;
  };
  put("train.txt", data.train_txt);
  put("test.txt", data.test_txt);
  put("kg_final.txt", data.kg_txt);
  std::string items = "org_id remap_id\n";
  for (std::size_t i = 0; i < data.truth.item_points.size(); ++i) {
    items += std::to_string(i) + " " + std::to_string(i) + "\n";
  }
  put("item_list.txt", items);
  put("ground_truth.json", ground_truth_json(data.truth));
}

EvalReport oracle_metrics(const GroundTruth& gt, const InteractionGraph& graph,
                          const EvalOptions& opts) {
  if (gt.user_interest.size() != graph.n_users || gt.item_points.size() != graph.n_items) {
    throw ContractError("oracle_metrics: ground truth does not match the interaction graph");
  }
  const UserScorer scorer = [&gt](Id u, std::vector<double>& scores) {
    const auto& region = gt.interest_regions[gt.user_interest[u]];
    // Inside points score -(center distance), which never drops below
    // -span; outside points are pushed below that and ordered by distance.
    double span = 1.0;
    for (std::size_t k = 0; k < region.lo.size(); ++k) span += region.hi[k] - region.lo[k];
    for (Id i = 0; i < scores.size(); ++i) {
      const double out = region.dist_out(gt.item_points[i]);
      scores[i] = out > 0.0 ? -(span + out) : -region.dist_center(gt.item_points[i]);
    }
  };
  return evaluate_scores(graph, scorer, opts);
}

EvalReport random_baseline(const InteractionGraph& graph, std::uint64_t seed,
                           const EvalOptions& opts) {
  const UserScorer scorer = [seed](Id u, std::vector<double>& scores) {
    Rng rng = Rng(seed).split(u);
    for (double& s : scores) s = rng.uniform();
  };
  return evaluate_scores(graph, scorer, opts);
}

}  // namespace inbox
