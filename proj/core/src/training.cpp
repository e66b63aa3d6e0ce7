#include "inbox/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include "inbox/errors.hpp"
#include "inbox/evaluation.hpp"
#include "inbox/log.hpp"

namespace inbox {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid training config: " + what);
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::vector<BoxView> views_of(const std::vector<Box>& boxes) {
  std::vector<BoxView> v;
  v.reserve(boxes.size());
  for (const auto& b : boxes) v.push_back(b.view());
  return v;
}

bool all_finite(const ParamTables& p) {
  bool ok = true;
  p.for_each([&ok](const char*, ConstSpan a) {
    for (double x : a) ok = ok && std::isfinite(x);
  });
  return ok;
}

// --- stage 1 ----------------------------------------------------------------

double pretrain_example(const PretrainExample& ex, const ParamStore& s, const TrainConfig& cfg,
                        double scale, ParamTables* g) {
  const auto& t = ex.triplet;
  const BoxView rel = s.relation(t.relation);
  std::vector<double> dn(ex.negatives.size());

  switch (ex.type) {
    case TripletType::IRI: {
      // v_h' = v_t + Cen(r); distance to the head point.
      const Point proj = project_point(s.item(t.tail), rel);
      const double dp = dist_pp(s.item(t.head), proj);
      for (std::size_t j = 0; j < dn.size(); ++j) dn[j] = dist_pp(s.item(ex.negatives[j].id), proj);
      const auto lg = margin_loss_grad(dp, dn, ex.weight, s.margin, cfg.literal_loss);
      if (g) {
        Vec dproj(s.dims.dim, 0.0);
        dist_pp_grad(s.item(t.head), proj, scale * lg.d_pos, g->items.row(t.head), dproj);
        for (std::size_t j = 0; j < dn.size(); ++j) {
          dist_pp_grad(s.item(ex.negatives[j].id), proj, scale * lg.d_negs[j],
                       g->items.row(ex.negatives[j].id), dproj);
        }
        auto dt = g->items.row(t.tail);
        auto dr = ParamStore::split(g->relations.row(t.relation));
        for (std::size_t k = 0; k < dproj.size(); ++k) {
          dt[k] += dproj[k];
          dr.center[k] += dproj[k];
        }
      }
      return lg.loss;
    }
    case TripletType::TRT: {
      const Box proj = project_box(s.tag(t.tail), rel);
      const double dp = dist_bb(s.tag(t.head), proj);
      for (std::size_t j = 0; j < dn.size(); ++j) dn[j] = dist_bb(s.tag(ex.negatives[j].id), proj);
      const auto lg = margin_loss_grad(dp, dn, ex.weight, s.margin, cfg.literal_loss);
      if (g) {
        Vec dpc(s.dims.dim, 0.0), dpo(s.dims.dim, 0.0);
        dist_bb_grad(s.tag(t.head), proj, scale * lg.d_pos,
                     ParamStore::split(g->tags.row(t.head)), {dpc, dpo});
        for (std::size_t j = 0; j < dn.size(); ++j) {
          const Id h = ex.negatives[j].id;
          dist_bb_grad(s.tag(h), proj, scale * lg.d_negs[j], ParamStore::split(g->tags.row(h)),
                       {dpc, dpo});
        }
        project_box_grad(s.tag(t.tail), dpc, dpo, ParamStore::split(g->tags.row(t.tail)),
                         ParamStore::split(g->relations.row(t.relation)));
      }
      return lg.loss;
    }
    case TripletType::IRT: {
      const Box proj = project_box(s.tag(t.tail), rel);
      const double dp = dist_pb(s.item(t.head), proj);
      // Tag replacements need their own projected box.
      std::vector<Box> neg_boxes(dn.size());
      for (std::size_t j = 0; j < dn.size(); ++j) {
        const auto& n = ex.negatives[j];
        if (n.replaces_tag) {
          neg_boxes[j] = project_box(s.tag(n.id), rel);
          dn[j] = dist_pb(s.item(t.head), neg_boxes[j]);
        } else {
          dn[j] = dist_pb(s.item(n.id), proj);
        }
      }
      const auto lg = margin_loss_grad(dp, dn, ex.weight, s.margin, cfg.literal_loss);
      if (g) {
        const std::size_t d = s.dims.dim;
        const auto dr = ParamStore::split(g->relations.row(t.relation));
        Vec dpc(d, 0.0), dpo(d, 0.0);
        dist_pb_grad(s.item(t.head), proj, scale * lg.d_pos, g->items.row(t.head), {dpc, dpo});
        for (std::size_t j = 0; j < dn.size(); ++j) {
          const auto& n = ex.negatives[j];
          if (n.replaces_tag) {
            Vec nc(d, 0.0), no(d, 0.0);
            dist_pb_grad(s.item(t.head), neg_boxes[j], scale * lg.d_negs[j], g->items.row(t.head),
                         {nc, no});
            project_box_grad(s.tag(n.id), nc, no, ParamStore::split(g->tags.row(n.id)), dr);
          } else {
            dist_pb_grad(s.item(n.id), proj, scale * lg.d_negs[j], g->items.row(n.id),
                         {dpc, dpo});
          }
        }
        project_box_grad(s.tag(t.tail), dpc, dpo, ParamStore::split(g->tags.row(t.tail)), dr);
      }
      return lg.loss;
    }
  }
  return 0.0;
}

// --- stage 2 ----------------------------------------------------------------

double intersection_example(const IntersectionExample& ex, const ParamStore& s,
                            const ConceptIndex& concepts, const TrainConfig& cfg, double scale,
                            ParamTables* g) {
  const auto cs = concepts.concepts_of(ex.item);
  if (cs.empty()) throw ContractError("intersection step: item has no concepts");
  const auto projected = concept_boxes(ex.item, s, concepts);
  const auto views = views_of(projected);
  const auto trace = item_intersection_forward(views, s, cfg.interest.variant);
  const Box& box = trace.result;

  const double dp = dist_pb(s.item(ex.item), box);
  std::vector<double> dn(ex.negatives.size());
  for (std::size_t j = 0; j < dn.size(); ++j) dn[j] = dist_pb(s.item(ex.negatives[j]), box);
  const auto lg = margin_loss_grad(dp, dn, ex.weight, s.margin, cfg.literal_loss);
  if (!g) return lg.loss;

  const std::size_t d = s.dims.dim;
  Vec dc(d, 0.0), dh(d, 0.0);
  dist_pb_grad(s.item(ex.item), box, scale * lg.d_pos, g->items.row(ex.item), {dc, dh});
  for (std::size_t j = 0; j < dn.size(); ++j) {
    dist_pb_grad(s.item(ex.negatives[j]), box, scale * lg.d_negs[j],
                 g->items.row(ex.negatives[j]), {dc, dh});
  }
  std::vector<Vec> dpc(views.size(), Vec(d, 0.0)), dpo(views.size(), Vec(d, 0.0));
  std::vector<BoxGrad> dboxes(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) dboxes[i] = {dpc[i], dpo[i]};
  item_intersection_backward(trace, views, s, dc, dh, dboxes, MutSpan(g->attn_net));
  for (std::size_t i = 0; i < cs.size(); ++i) {
    project_box_grad(s.tag(cs[i].tag), dpc[i], dpo[i], ParamStore::split(g->tags.row(cs[i].tag)),
                     ParamStore::split(g->relations.row(cs[i].relation)));
  }
  return lg.loss;
}

// --- stage 3 ----------------------------------------------------------------

// The user box of an example leaves the positive out of the mean when it is
// part of the history, so the model cannot score an item by its own box.
double recommendation_group(const RecommendationGroup& grp, const ParamStore& s,
                            const ConceptIndex& concepts, const TrainConfig& cfg, double scale,
                            ParamTables* g) {
  const std::size_t d = s.dims.dim;
  const std::size_t m = grp.history.size();
  if (m == 0) throw ContractError("recommendation step: empty history");

  std::vector<ItemBoxTrace> traces;
  traces.reserve(m);
  Vec sum_c(d, 0.0), sum_h(d, 0.0);
  std::unordered_map<Id, std::size_t> pos_of;
  for (std::size_t j = 0; j < m; ++j) {
    traces.push_back(item_interest_forward(grp.history[j], grp.user, s, concepts, cfg.interest));
    const Box& b = traces.back().result;
    for (std::size_t k = 0; k < d; ++k) {
      sum_c[k] += b.center[k];
      sum_h[k] += act(b.offset[k]);
    }
    pos_of.emplace(grp.history[j], j);
  }

  std::vector<Vec> dC, dH;
  if (g) {
    dC.assign(m, Vec(d, 0.0));
    dH.assign(m, Vec(d, 0.0));
  }

  double loss = 0.0;
  Box ub(d);
  for (const auto& ex : grp.examples) {
    std::size_t left_out = m;
    if (m > 1) {
      if (auto it = pos_of.find(ex.positive); it != pos_of.end()) left_out = it->second;
    }
    const double inv = 1.0 / static_cast<double>(left_out < m ? m - 1 : m);
    for (std::size_t k = 0; k < d; ++k) {
      double c = sum_c[k], h = sum_h[k];
      if (left_out < m) {
        c -= traces[left_out].result.center[k];
        h -= act(traces[left_out].result.offset[k]);
      }
      ub.center[k] = inv * c;
      ub.offset[k] = inv * h;
    }

    const double dp = dist_pb(s.item(ex.positive), ub);
    std::vector<double> dn(ex.negatives.size());
    for (std::size_t j = 0; j < dn.size(); ++j) dn[j] = dist_pb(s.item(ex.negatives[j]), ub);
    const auto lg = margin_loss_grad(dp, dn, ex.weight, s.margin, cfg.literal_loss);
    loss += lg.loss;
    if (!g) continue;

    Vec dbc(d, 0.0), dbo(d, 0.0);
    dist_pb_grad(s.item(ex.positive), ub, scale * lg.d_pos, g->items.row(ex.positive),
                 {dbc, dbo});
    for (std::size_t j = 0; j < dn.size(); ++j) {
      dist_pb_grad(s.item(ex.negatives[j]), ub, scale * lg.d_negs[j],
                   g->items.row(ex.negatives[j]), {dbc, dbo});
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (j == left_out) continue;
      const auto& off = traces[j].result.offset;
      for (std::size_t k = 0; k < d; ++k) {
        dC[j][k] += inv * dbc[k];
        dH[j][k] += inv * dbo[k] * act_grad(off[k]);
      }
    }
  }

  if (g) {
    for (std::size_t j = 0; j < m; ++j) item_interest_backward(traces[j], s, dC[j], dH[j], *g);
  }
  return loss;
}

double run_batch(const Batch& batch, const ParamStore& store, const ConceptIndex& concepts,
                 const TrainConfig& cfg, ParamTables* g) {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("grad_step: empty batch");
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  switch (batch.stage) {
    case Stage::Pretrain:
      for (const auto& ex : batch.pretrain) total += pretrain_example(ex, store, cfg, scale, g);
      break;
    case Stage::Intersection:
      for (const auto& ex : batch.intersection) {
        total += intersection_example(ex, store, concepts, cfg, scale, g);
      }
      break;
    case Stage::Recommendation:
      for (const auto& grp : batch.recommendation) {
        total += recommendation_group(grp, store, concepts, cfg, scale, g);
      }
      if (g && cfg.freeze_attention_in_recommendation) {
        std::fill(g->attn_net.begin(), g->attn_net.end(), 0.0);
      }
      break;
  }
  return total * scale;
}

}  // namespace

// --- config -----------------------------------------------------------------

void TrainConfig::validate() const {
  require(dim >= 1, "dim must be >= 1");
  require(std::isfinite(margin) && margin > 0.0, "margin must be positive");
  require(std::isfinite(init_scale) && init_scale >= 0.0, "init_scale must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(n_negatives >= 1, "n_negatives must be >= 1");
  require(std::isfinite(base_lr) && base_lr > 0.0, "base_lr must be positive");
  require(lr_milestones.size() == lr_factors.size(), "lr_milestones and lr_factors differ in length");
  for (std::size_t i = 0; i < lr_milestones.size(); ++i) {
    require(lr_milestones[i] > 0.0 && lr_milestones[i] < 1.0, "lr milestones must lie in (0, 1)");
    require(i == 0 || lr_milestones[i] > lr_milestones[i - 1], "lr milestones must increase");
    require(lr_factors[i] > 0.0, "lr factors must be positive");
  }
  require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be >= 0");
  require(clip_norm > 0.0, "clip_norm must be positive");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in [0, 1)");
  require(patience >= 1, "patience must be >= 1");
  require(eval_k >= 1, "eval_k must be >= 1");
}

std::vector<Stage> enabled_stages(const TrainConfig& cfg) {
  std::vector<Stage> s;
  if (cfg.pretrain) s.push_back(Stage::Pretrain);
  if (cfg.intersection) s.push_back(Stage::Intersection);
  s.push_back(Stage::Recommendation);
  return s;
}

// --- loss -------------------------------------------------------------------

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double margin_loss(double d_pos, std::span<const double> d_negs, double w, double gamma,
                   bool literal_form) {
  return margin_loss_grad(d_pos, d_negs, w, gamma, literal_form).loss;
}

MarginLossGrad margin_loss_grad(double d_pos, std::span<const double> d_negs, double w,
                                double gamma, bool literal_form) {
  if (d_negs.empty()) throw ContractError("margin_loss: no negatives");
  MarginLossGrad r;
  const double inv_n = 1.0 / static_cast<double>(d_negs.size());
  double neg = 0.0;
  r.d_negs.resize(d_negs.size());
  for (std::size_t i = 0; i < d_negs.size(); ++i) {
    if (literal_form) {
      neg -= log_sigmoid(gamma - d_negs[i]);
      r.d_negs[i] = -w * inv_n * sigmoid(d_negs[i] - gamma);
    } else {
      neg += log_sigmoid(d_negs[i] - gamma);
      r.d_negs[i] = -w * inv_n * sigmoid(gamma - d_negs[i]);
    }
  }
  r.loss = -w * (log_sigmoid(gamma - d_pos) + inv_n * neg);
  r.d_pos = w * sigmoid(d_pos - gamma);
  return r;
}

// --- batches ----------------------------------------------------------------

std::size_t Batch::size() const {
  std::size_t n = pretrain.size() + intersection.size();
  for (const auto& g : recommendation) n += g.examples.size();
  return n;
}

TrainingView make_training_view(const InteractionGraph& graph, double fraction, Rng& rng) {
  TrainingView v;
  auto& g = v.graph;
  g.n_users = graph.n_users;
  g.n_items = graph.n_items;
  g.train.resize(graph.n_users);
  g.test.resize(graph.n_users);
  g.train_history.resize(graph.n_users);
  for (Id u = 0; u < graph.n_users; ++u) {
    const auto& hist = graph.train_history[u];
    const std::size_t m = hist.size();
    std::size_t hold = 0;
    if (m >= 2 && fraction > 0.0) {
      hold = std::min(m - 1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m))));
    }
    std::vector<Id> picked(hist.begin(), hist.end());
    rng.shuffle(picked.begin(), picked.end());
    picked.resize(hold);
    std::sort(picked.begin(), picked.end());
    for (Id i : hist) {
      if (!std::binary_search(picked.begin(), picked.end(), i)) {
        g.train_history[u].push_back(i);
        v.pairs.emplace_back(u, i);
      }
    }
    g.train[u] = g.train_history[u];
    std::sort(g.train[u].begin(), g.train[u].end());
    g.test[u] = std::move(picked);
  }
  return v;
}

BatchSampler::BatchSampler(const Dataset& ds, const TrainingView& view, const TrainConfig& cfg)
    : ds_(&ds),
      view_(&view),
      cfg_(&cfg),
      negatives_(ds),
      items_with_concepts_(ds.concepts.items_with_concepts()) {
  if (atoms(Stage::Pretrain) > 0) types_.emplace(ds.kg, cfg.only_irt);
}

std::size_t BatchSampler::atoms(Stage stage) const {
  switch (stage) {
    case Stage::Pretrain: return cfg_->only_irt ? ds_->kg.irt.size() : ds_->kg.size();
    case Stage::Intersection: return items_with_concepts_.size();
    case Stage::Recommendation: return view_->pairs.size();
  }
  return 0;
}

std::size_t BatchSampler::steps_per_epoch(Stage stage) const {
  return ceil_div(atoms(stage), cfg_->batch_size);
}

Batch BatchSampler::pretrain_batch(Rng& rng) const {
  if (atoms(Stage::Pretrain) == 0) throw ContractError("pretrain batch: no triplets");
  Batch b;
  b.stage = Stage::Pretrain;
  const TripletType type = (*types_)(rng);
  const auto& pool = ds_->kg.of(type);
  b.pretrain.reserve(cfg_->batch_size);
  for (std::size_t k = 0; k < cfg_->batch_size; ++k) {
    PretrainExample ex;
    ex.type = type;
    ex.triplet = pool[rng.below(pool.size())];
    const auto answers = ds_->answers.heads(type, ex.triplet.relation, ex.triplet.tail);
    ex.weight = sample_weight(Stage::Pretrain, std::max<std::size_t>(1, answers.size()));
    NegativeContext ctx;
    ctx.type = type;
    ctx.triplet = ex.triplet;
    const auto kind =
        type == TripletType::IRT ? NegativeKind::ItemOrTag : NegativeKind::HeadEntity;
    ex.negatives = negatives_.sample(kind, ctx, cfg_->n_negatives, rng);
    b.pretrain.push_back(std::move(ex));
  }
  return b;
}

Batch BatchSampler::intersection_batch(std::span<const Id> items, Rng& rng) const {
  Batch b;
  b.stage = Stage::Intersection;
  b.intersection.reserve(items.size());
  for (Id item : items) {
    IntersectionExample ex;
    ex.item = item;
    ex.weight = sample_weight(Stage::Intersection, ds_->concepts.concepts_of(item).size());
    NegativeContext ctx;
    ctx.item = item;
    const auto negs = negatives_.sample(NegativeKind::ItemNotInConcepts, ctx, cfg_->n_negatives, rng);
    ex.negatives.reserve(negs.size());
    for (const auto& n : negs) ex.negatives.push_back(n.id);
    b.intersection.push_back(std::move(ex));
  }
  return b;
}

Batch BatchSampler::recommendation_batch(std::span<const std::pair<Id, Id>> pairs,
                                         Rng& rng) const {
  Batch b;
  b.stage = Stage::Recommendation;
  std::unordered_map<Id, std::size_t> group_of;
  for (const auto& [user, item] : pairs) {
    auto [it, fresh] = group_of.emplace(user, b.recommendation.size());
    if (fresh) {
      RecommendationGroup grp;
      grp.user = user;
      const auto h = user_history(view_->graph, user, cfg_->interest.history_cap);
      grp.history.assign(h.begin(), h.end());
      b.recommendation.push_back(std::move(grp));
    }
    RecommendationExample ex;
    ex.positive = item;
    ex.weight =
        sample_weight(Stage::Recommendation, view_->graph.train[user].size(), cfg_->alpha);
    NegativeContext ctx;
    ctx.user = user;
    const auto negs = negatives_.sample(NegativeKind::ItemNotInteracted, ctx, cfg_->n_negatives, rng);
    ex.negatives.reserve(negs.size());
    for (const auto& n : negs) ex.negatives.push_back(n.id);
    b.recommendation[it->second].examples.push_back(std::move(ex));
  }
  return b;
}

// --- gradients --------------------------------------------------------------

StepResult grad_step(const Batch& batch, const ParamStore& store, const ConceptIndex& concepts,
                     const TrainConfig& cfg) {
  StepResult r;
  r.tape = zeros_like(store.params);
  r.loss = run_batch(batch, store, concepts, cfg, &r.tape);
  if (!std::isfinite(r.loss) || !all_finite(r.tape)) {
    throw DivergedError("non-finite loss or gradient in " + std::string(to_string(batch.stage)) +
                        " step");
  }
  return r;
}

double batch_loss(const Batch& batch, const ParamStore& store, const ConceptIndex& concepts,
                  const TrainConfig& cfg) {
  return run_batch(batch, store, concepts, cfg, nullptr);
}

// --- optimizer --------------------------------------------------------------

double lr_schedule(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) return cfg.base_lr;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  double factor = 1.0;
  for (std::size_t i = 0; i < cfg.lr_milestones.size(); ++i) {
    if (frac >= cfg.lr_milestones[i]) factor = cfg.lr_factors[i];
  }
  return cfg.base_lr * factor;
}

double clip_gradients(GradTape& tape, double max_norm) {
  double sq = 0.0;
  tape.for_each([&sq](const char*, ConstSpan a) {
    for (double x : a) sq += x * x;
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    tape.for_each([f](const char*, MutSpan a) {
      for (double& x : a) x *= f;
    });
  }
  return norm;
}

void adam_update(ParamTables& params, const GradTape& grad, OptimizerState& state, double lr,
                 const AdamConfig& adam) {
  if (state.m.size() != params.size()) state.m = zeros_like(params);
  if (state.v.size() != params.size()) state.v = zeros_like(params);
  if (grad.size() != params.size()) throw ContractError("adam_update: gradient shape mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);

  std::vector<MutSpan> p, m, v;
  std::vector<ConstSpan> g;
  params.for_each([&p](const char*, MutSpan a) { p.push_back(a); });
  state.m.for_each([&m](const char*, MutSpan a) { m.push_back(a); });
  state.v.for_each([&v](const char*, MutSpan a) { v.push_back(a); });
  grad.for_each([&g](const char*, ConstSpan a) { g.push_back(a); });
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t i = 0; i < p[a].size(); ++i) {
      const double gi = g[a][i];
      m[a][i] = adam.beta1 * m[a][i] + (1.0 - adam.beta1) * gi;
      v[a][i] = adam.beta2 * v[a][i] + (1.0 - adam.beta2) * gi * gi;
      p[a][i] -= lr * (m[a][i] / c1) / (std::sqrt(v[a][i] / c2) + adam.eps);
    }
  }
}

// --- pipeline ---------------------------------------------------------------

void write_log_record(std::ostream& out, const LogRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d %zu %zu %.8g %.6g %s\n", static_cast<int>(r.stage), r.epoch,
                r.step, r.loss, r.lr,
                std::isnan(r.recall20) ? "nan" : std::to_string(r.recall20).c_str());
  out << buf;
}

PipelineState init_pipeline(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  ModelDims dims{ds.n_items(), ds.n_tags(), ds.n_relations(), ds.n_users(), cfg.dim};
  InitConfig init;
  init.margin = cfg.margin;
  init.scale = cfg.init_scale;
  init.net = cfg.net;
  PipelineState st;
  st.store = init_params(dims, init, cfg.seed);
  st.optimizer.m = zeros_like(st.store.params);
  st.optimizer.v = zeros_like(st.store.params);
  return st;
}

namespace {

// Streams are derived from the seed alone, so a run resumed from a stage
// checkpoint continues exactly as an uninterrupted one would.
Rng stage_rng(std::uint64_t seed, std::uint64_t salt) {
  Rng root(seed ^ 0xA5A5A5A55A5A5A5AULL);
  return root.split(salt);
}

void run_stage(Stage stage, const Dataset& ds, const TrainConfig& cfg, const TrainingView& view,
               const BatchSampler& sampler, PipelineState& st, const PipelineHooks& hooks) {
  const std::size_t epochs = stage == Stage::Pretrain       ? cfg.epochs_pretrain
                             : stage == Stage::Intersection ? cfg.epochs_intersection
                                                            : cfg.epochs_recommendation;
  const std::size_t spe = sampler.steps_per_epoch(stage);
  if (epochs == 0 || spe == 0) {
    log_warn(std::string("skipping ") + to_string(stage) + " stage: nothing to train on");
    return;
  }
  const std::size_t total = epochs * spe;
  Rng rng = stage_rng(cfg.seed, static_cast<std::uint64_t>(stage));

  std::vector<Id> items = sampler.intersection_items();
  std::vector<std::pair<Id, Id>> pairs = view.pairs;
  const bool validate = stage == Stage::Recommendation &&
                        std::any_of(view.graph.test.begin(), view.graph.test.end(),
                                    [](const auto& t) { return !t.empty(); });
  double best = -1.0;
  std::size_t stale = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    if (stage == Stage::Intersection) rng.shuffle(items.begin(), items.end());
    if (stage == Stage::Recommendation) rng.shuffle(pairs.begin(), pairs.end());
    double loss_sum = 0.0;
    std::size_t ok = 0;
    double lr = cfg.base_lr;
    for (std::size_t s = 0; s < spe; ++s, ++step) {
      const std::size_t lo = s * cfg.batch_size;
      Batch batch;
      if (stage == Stage::Pretrain) {
        batch = sampler.pretrain_batch(rng);
      } else if (stage == Stage::Intersection) {
        const std::size_t hi = std::min(items.size(), lo + cfg.batch_size);
        batch = sampler.intersection_batch(std::span<const Id>(items).subspan(lo, hi - lo), rng);
      } else {
        const std::size_t hi = std::min(pairs.size(), lo + cfg.batch_size);
        batch = sampler.recommendation_batch(
            std::span<const std::pair<Id, Id>>(pairs).subspan(lo, hi - lo), rng);
      }
      lr = lr_schedule(step, total, cfg);
      StepResult res;
      try {
        res = grad_step(batch, st.store, ds.concepts, cfg);
      } catch (const DivergedError& e) {
        log_warn(std::string(e.what()) + "; step skipped");
        continue;
      }
      clip_gradients(res.tape, cfg.clip_norm);
      adam_update(st.store.params, res.tape, st.optimizer, lr);
      quantize_to_float(st.store.params);
      loss_sum += res.loss;
      ++ok;
    }
    if (ok == 0) {
      throw DivergedError(std::string(to_string(stage)) + " stage diverged: every step of epoch " +
                          std::to_string(epoch) + " produced a non-finite loss");
    }

    LogRecord rec{stage, epoch, step, loss_sum / static_cast<double>(ok), lr,
                  std::numeric_limits<double>::quiet_NaN()};
    bool stop = false;
    if (validate) {
      EvalOptions opts;
      opts.k = cfg.eval_k;
      opts.threads = cfg.eval_threads;
      rec.recall20 = evaluate(st.store, view.graph, ds.concepts, cfg.interest, opts).recall;
      if (rec.recall20 > best) {
        best = rec.recall20;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        stop = true;
      }
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
    log_info(std::string(to_string(stage)) + " epoch " + std::to_string(epoch) + " loss " +
             std::to_string(rec.loss));
    if (stop) {
      log_info("early stop: validation recall did not improve for " +
               std::to_string(cfg.patience) + " epochs");
      break;
    }
  }
}

}  // namespace

void run_pipeline(const Dataset& ds, const TrainConfig& cfg, PipelineState& st,
                  const PipelineHooks& hooks) {
  cfg.validate();
  const auto& d = st.store.dims;
  if (d.n_items != ds.n_items() || d.n_users != ds.n_users() || d.n_tags != ds.n_tags() ||
      d.n_relations != ds.n_relations()) {
    throw DataError("model shape does not match the dataset");
  }
  // Clamped distances swallow NaN coordinates, so a poisoned state would
  // otherwise train on silently.
  if (!all_finite(st.store.params)) {
    throw DivergedError("starting state contains non-finite parameters");
  }
  Rng view_rng = stage_rng(cfg.seed, 0);
  const TrainingView view = make_training_view(ds.graph, cfg.validation_fraction, view_rng);
  const BatchSampler sampler(ds, view, cfg);
  for (Stage stage : enabled_stages(cfg)) {
    if (static_cast<int>(stage) <= st.store.stage_completed) continue;
    run_stage(stage, ds, cfg, view, sampler, st, hooks);
    st.store.stage_completed = static_cast<int>(stage);
    if (hooks.on_stage_end) hooks.on_stage_end(stage, st);
  }
}

PipelineState run_pipeline(const Dataset& ds, const TrainConfig& cfg, const PipelineHooks& hooks) {
  PipelineState st = init_pipeline(ds, cfg);
  run_pipeline(ds, cfg, st, hooks);
  return st;
}

}  // namespace inbox
