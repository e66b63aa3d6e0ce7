#include "inbox/model.hpp"

#include <algorithm>
#include <cmath>

#include "inbox/errors.hpp"

namespace inbox {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Softmax across boxes, independently per dimension. logits[i][k].
std::vector<Vec> softmax_over_boxes(const std::vector<Vec>& logits) {
  const std::size_t n = logits.size();
  const std::size_t d = logits.front().size();
  std::vector<Vec> w(n, Vec(d));
  for (std::size_t k = 0; k < d; ++k) {
    double mx = logits[0][k];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i][k]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i][k] = std::exp(logits[i][k] - mx);
      z += w[i][k];
    }
    for (std::size_t i = 0; i < n; ++i) w[i][k] /= z;
  }
  return w;
}

// Given weights w and the upstream gradient dw on them, the gradient on the
// logits: dz_ik = w_ik * (dw_ik - sum_j w_jk dw_jk).
std::vector<Vec> softmax_backward(const std::vector<Vec>& w, const std::vector<Vec>& dw) {
  const std::size_t n = w.size();
  const std::size_t d = w.front().size();
  std::vector<Vec> dz(n, Vec(d));
  for (std::size_t k = 0; k < d; ++k) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += w[i][k] * dw[i][k];
    for (std::size_t i = 0; i < n; ++i) dz[i][k] = w[i][k] * (dw[i][k] - dot);
  }
  return dz;
}

void require_boxes(std::span<const BoxView> boxes, std::size_t d, const char* op) {
  if (boxes.empty()) throw ContractError(std::string(op) + ": empty box sequence");
  for (const auto& b : boxes) {
    if (b.center.size() != d || b.offset.size() != d) {
      throw ContractError(std::string(op) + ": dimension mismatch");
    }
  }
}

Vec half_widths(BoxView b) {
  Vec h(b.dim());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = act(b.offset[k]);
  return h;
}

void add(MutSpan dst, ConstSpan src) {
  if (dst.empty()) return;
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
}

}  // namespace

std::size_t ParamTables::size() const {
  std::size_t n = 0;
  for_each([&n](const char*, ConstSpan s) { n += s.size(); });
  return n;
}

void ParamTables::set_zero() {
  for_each([](const char*, MutSpan s) { std::fill(s.begin(), s.end(), 0.0); });
}

ParamTables zeros_like(const ParamTables& p) {
  ParamTables z;
  z.items = Table(p.items.rows(), p.items.cols());
  z.tags = Table(p.tags.rows(), p.tags.cols());
  z.relations = Table(p.relations.rows(), p.relations.cols());
  z.users = Table(p.users.rows(), p.users.cols());
  z.attn_net.assign(p.attn_net.size(), 0.0);
  z.user_net.assign(p.user_net.size(), 0.0);
  return z;
}

std::size_t NetLayout::attn_size() const {
  return attn_center.param_count() + attn_inner.param_count() + attn_outer.param_count();
}

std::size_t NetLayout::user_size() const {
  return user_center.param_count() + user_offset.param_count();
}

NetLayout make_net_layout(std::size_t dim, const IntersectionNetConfig& net) {
  const std::size_t width = net.hidden_width == 0 ? dim : net.hidden_width;
  const std::vector<std::size_t> hidden(net.hidden_layers, width);
  const auto shape = [&](std::size_t in) { return MlpShape{in, dim, hidden, net.activation}; };
  return {shape(dim), shape(dim), shape(dim), shape(2 * dim), shape(2 * dim)};
}

void quantize_to_float(ParamTables& p) {
  p.for_each([](const char*, MutSpan s) {
    for (auto& x : s) x = static_cast<double>(static_cast<float>(x));
  });
}

ParamStore init_params(const ModelDims& dims, const InitConfig& cfg, std::uint64_t seed) {
  if (dims.dim == 0) throw ContractError("init_params: embedding dimension must be > 0");
  if (dims.n_items == 0 || dims.n_users == 0) {
    throw ContractError("init_params: item and user counts must be > 0");
  }
  ParamStore s;
  s.dims = dims;
  s.margin = cfg.margin;
  s.net = cfg.net;
  s.seed = seed;
  const std::size_t d = dims.dim;
  const double scale = cfg.scale > 0.0 ? cfg.scale : static_cast<double>(d) / 8.0;
  const double bound = cfg.margin / (2.0 * static_cast<double>(d)) * scale;
  const double off_hi = cfg.margin / static_cast<double>(d);

  Rng rng(seed);
  auto& p = s.params;
  p.items = Table(dims.n_items, d);
  p.tags = Table(dims.n_tags, 2 * d);
  p.relations = Table(dims.n_relations, 2 * d);
  p.users = Table(dims.n_users, d);
  for (auto& x : p.items.data()) x = rng.uniform(-bound, bound);
  for (Table* t : {&p.tags, &p.relations}) {
    for (std::size_t r = 0; r < t->rows(); ++r) {
      auto row = t->row(r);
      for (std::size_t k = 0; k < d; ++k) row[k] = rng.uniform(-bound, bound);
      for (std::size_t k = d; k < 2 * d; ++k) row[k] = rng.uniform(0.0, off_hi);
    }
  }
  for (auto& x : p.users.data()) x = rng.uniform(-bound, bound);

  const auto layout = s.layout();
  p.attn_net.assign(layout.attn_size(), 0.0);
  p.user_net.assign(layout.user_size(), 0.0);
  MutSpan attn(p.attn_net), user(p.user_net);
  mlp_init(layout.attn_center, layout.attn_center_w(attn), rng);
  mlp_init(layout.attn_inner, layout.attn_inner_w(attn), rng);
  mlp_init(layout.attn_outer, layout.attn_outer_w(attn), rng);
  mlp_init(layout.user_center, layout.user_center_w(user), rng);
  mlp_init(layout.user_offset, layout.user_offset_w(user), rng);
  quantize_to_float(p);
  // Strictly positive initial half-widths.
  for (Table* t : {&p.tags, &p.relations}) {
    for (std::size_t r = 0; r < t->rows(); ++r) {
      auto row = t->row(r);
      for (std::size_t k = d; k < 2 * d; ++k) {
        if (row[k] <= 0.0) row[k] = static_cast<double>(static_cast<float>(off_hi * 0.5));
      }
    }
  }
  return s;
}

// --- attention intersection ---------------------------------------------

AttentionTrace attention_intersect_forward(std::span<const BoxView> boxes,
                                           const ParamStore& store) {
  const std::size_t d = store.dims.dim;
  require_boxes(boxes, d, "attention_intersect");
  const std::size_t n = boxes.size();
  const auto layout = store.layout();
  const ConstSpan net(store.params.attn_net);

  AttentionTrace t;
  t.center_cache.resize(n);
  t.inner_cache.resize(n);
  std::vector<Vec> logits(n, Vec(d));
  for (std::size_t i = 0; i < n; ++i) {
    mlp_forward(layout.attn_center, layout.attn_center_w(net), boxes[i].center, t.center_cache[i],
                logits[i]);
  }
  t.weights = softmax_over_boxes(logits);

  t.result = Box(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) t.result.center[k] += t.weights[i][k] * boxes[i].center[k];
  }

  t.argmin.assign(d, 0);
  t.min_half.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double m = boxes[0].half_width(k);
    for (std::size_t i = 1; i < n; ++i) {
      const double h = boxes[i].half_width(k);
      if (h < m) {
        m = h;
        t.argmin[k] = i;
      }
    }
    t.min_half[k] = m;
  }

  Vec mean_feat(d, 0.0), feat(d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec h = half_widths(boxes[i]);
    mlp_forward(layout.attn_inner, layout.attn_inner_w(net), h, t.inner_cache[i], feat);
    for (std::size_t k = 0; k < d; ++k) mean_feat[k] += feat[k] / static_cast<double>(n);
  }
  Vec gate_logit(d);
  mlp_forward(layout.attn_outer, layout.attn_outer_w(net), mean_feat, t.outer_cache, gate_logit);
  t.gate.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    t.gate[k] = sigmoid(gate_logit[k]);
    t.result.offset[k] = t.min_half[k] * t.gate[k];
  }
  return t;
}

Box attention_intersect(std::span<const BoxView> boxes, const ParamStore& store) {
  return attention_intersect_forward(boxes, store).result;
}

void attention_intersect_backward(const AttentionTrace& t, std::span<const BoxView> boxes,
                                  const ParamStore& store, ConstSpan d_center, ConstSpan d_half,
                                  std::span<BoxGrad> dboxes, MutSpan d_attn_net) {
  const std::size_t d = store.dims.dim;
  const std::size_t n = boxes.size();
  const auto layout = store.layout();
  const ConstSpan net(store.params.attn_net);

  // center = sum_i a_i * c_i
  std::vector<Vec> d_weights(n, Vec(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      if (!dboxes[i].center.empty()) dboxes[i].center[k] += t.weights[i][k] * d_center[k];
      d_weights[i][k] = d_center[k] * boxes[i].center[k];
    }
  }
  const auto d_logits = softmax_backward(t.weights, d_weights);
  Vec dx(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dx.begin(), dx.end(), 0.0);
    mlp_backward(layout.attn_center, layout.attn_center_w(net), t.center_cache[i], d_logits[i],
                 layout.attn_center_w(d_attn_net), dx);
    add(dboxes[i].center, dx);
  }

  // half = min_i h_i * sigmoid(outer(mean_i inner(h_i)))
  Vec d_gate_logit(d);
  std::vector<Vec> d_half_members(n, Vec(d, 0.0));
  for (std::size_t k = 0; k < d; ++k) {
    d_half_members[t.argmin[k]][k] += d_half[k] * t.gate[k];
    const double dg = d_half[k] * t.min_half[k];
    d_gate_logit[k] = dg * t.gate[k] * (1.0 - t.gate[k]);
  }
  Vec d_mean(d, 0.0);
  mlp_backward(layout.attn_outer, layout.attn_outer_w(net), t.outer_cache, d_gate_logit,
               layout.attn_outer_w(d_attn_net), d_mean);
  for (auto& x : d_mean) x /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    mlp_backward(layout.attn_inner, layout.attn_inner_w(net), t.inner_cache[i], d_mean,
                 layout.attn_inner_w(d_attn_net), d_half_members[i]);
    if (dboxes[i].offset.empty()) continue;
    for (std::size_t k = 0; k < d; ++k) {
      dboxes[i].offset[k] += d_half_members[i][k] * act_grad(boxes[i].offset[k]);
    }
  }
}

// --- user-bias intersection -----------------------------------------------

UserBiasTrace user_bias_intersect_forward(std::span<const BoxView> boxes, PointView user,
                                          const ParamStore& store) {
  const std::size_t d = store.dims.dim;
  require_boxes(boxes, d, "user_bias_intersect");
  if (user.size() != d) throw ContractError("user_bias_intersect: user vector dimension mismatch");
  const std::size_t n = boxes.size();
  const auto layout = store.layout();
  const ConstSpan net(store.params.user_net);

  UserBiasTrace t;
  t.center_cache.resize(n);
  t.offset_cache.resize(n);
  std::vector<Vec> zc(n, Vec(d)), zo(n, Vec(d));
  Vec x(2 * d);
  std::copy(user.begin(), user.end(), x.begin() + static_cast<std::ptrdiff_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(boxes[i].center.begin(), boxes[i].center.end(), x.begin());
    mlp_forward(layout.user_center, layout.user_center_w(net), x, t.center_cache[i], zc[i]);
    for (std::size_t k = 0; k < d; ++k) x[k] = boxes[i].half_width(k);
    mlp_forward(layout.user_offset, layout.user_offset_w(net), x, t.offset_cache[i], zo[i]);
  }
  t.center_weights = softmax_over_boxes(zc);
  t.offset_weights = softmax_over_boxes(zo);
  t.result = Box(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      t.result.center[k] += t.center_weights[i][k] * boxes[i].center[k];
      t.result.offset[k] += t.offset_weights[i][k] * boxes[i].half_width(k);
    }
  }
  return t;
}

Box user_bias_intersect(std::span<const BoxView> boxes, PointView user, const ParamStore& store) {
  return user_bias_intersect_forward(boxes, user, store).result;
}

void user_bias_intersect_backward(const UserBiasTrace& t, std::span<const BoxView> boxes,
                                  PointView /*user*/, const ParamStore& store,
                                  ConstSpan d_center, ConstSpan d_half,
                                  std::span<BoxGrad> dboxes, MutSpan d_user,
                                  MutSpan d_user_net) {
  const std::size_t d = store.dims.dim;
  const std::size_t n = boxes.size();
  const auto layout = store.layout();
  const ConstSpan net(store.params.user_net);

  std::vector<Vec> dwc(n, Vec(d)), dwo(n, Vec(d));
  std::vector<Vec> dh(n, Vec(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      if (!dboxes[i].center.empty()) {
        dboxes[i].center[k] += t.center_weights[i][k] * d_center[k];
      }
      dwc[i][k] = d_center[k] * boxes[i].center[k];
      dh[i][k] += t.offset_weights[i][k] * d_half[k];
      dwo[i][k] = d_half[k] * boxes[i].half_width(k);
    }
  }
  const auto dzc = softmax_backward(t.center_weights, dwc);
  const auto dzo = softmax_backward(t.offset_weights, dwo);
  Vec dx(2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dx.begin(), dx.end(), 0.0);
    mlp_backward(layout.user_center, layout.user_center_w(net), t.center_cache[i], dzc[i],
                 layout.user_center_w(d_user_net), dx);
    add(dboxes[i].center, ConstSpan(dx).first(d));
    add(d_user, ConstSpan(dx).subspan(d));

    std::fill(dx.begin(), dx.end(), 0.0);
    mlp_backward(layout.user_offset, layout.user_offset_w(net), t.offset_cache[i], dzo[i],
                 layout.user_offset_w(d_user_net), dx);
    for (std::size_t k = 0; k < d; ++k) dh[i][k] += dx[k];
    add(d_user, ConstSpan(dx).subspan(d));
    if (dboxes[i].offset.empty()) continue;
    for (std::size_t k = 0; k < d; ++k) {
      dboxes[i].offset[k] += dh[i][k] * act_grad(boxes[i].offset[k]);
    }
  }
}

// --- interest boxes -------------------------------------------------------

const char* to_string(IntersectionVariant v) {
  return v == IntersectionVariant::Attention ? "attention" : "maxmin";
}

const char* to_string(CombineMode c) {
  switch (c) {
    case CombineMode::Both: return "both";
    case CombineMode::ItemOnly: return "item";
    case CombineMode::UserOnly: return "user";
  }
  return "?";
}

IntersectionVariant parse_variant(const std::string& s) {
  if (s == "attention") return IntersectionVariant::Attention;
  if (s == "maxmin") return IntersectionVariant::MaxMin;
  throw ConfigError("unknown intersection variant '" + s + "' (expected attention or maxmin)");
}

CombineMode parse_combine(const std::string& s) {
  if (s == "both") return CombineMode::Both;
  if (s == "item") return CombineMode::ItemOnly;
  if (s == "user") return CombineMode::UserOnly;
  throw ConfigError("unknown combine mode '" + s + "' (expected both, item or user)");
}

std::vector<Box> concept_boxes(Id item, const ParamStore& store, const ConceptIndex& concepts) {
  std::vector<Box> out;
  for (const auto& c : concepts.concepts_of(item)) {
    out.push_back(project_box(store.tag(c.tag), store.relation(c.relation)));
  }
  return out;
}

ItemIntersectionTrace item_intersection_forward(std::span<const BoxView> boxes,
                                                const ParamStore& store,
                                                IntersectionVariant variant) {
  ItemIntersectionTrace t;
  t.variant = variant;
  if (variant == IntersectionVariant::Attention) {
    t.attention = attention_intersect_forward(boxes, store);
    t.result = t.attention.result;
  } else {
    t.result = maxmin_intersect(boxes);
  }
  return t;
}

void item_intersection_backward(const ItemIntersectionTrace& t, std::span<const BoxView> boxes,
                                const ParamStore& store, ConstSpan d_center, ConstSpan d_half,
                                std::span<BoxGrad> dboxes, MutSpan d_attn_net) {
  if (t.variant == IntersectionVariant::Attention) {
    attention_intersect_backward(t.attention, boxes, store, d_center, d_half, dboxes, d_attn_net);
  } else {
    maxmin_intersect_grad(boxes, d_center, d_half, dboxes);
  }
}

namespace {
std::vector<BoxView> views_of(const std::vector<Box>& boxes) {
  return {boxes.begin(), boxes.end()};
}
}  // namespace

ItemBoxTrace item_interest_forward(Id item, Id user, const ParamStore& store,
                                   const ConceptIndex& concepts, const InterestConfig& cfg) {
  if (item >= store.dims.n_items) throw RangeError("item_interest_box: item out of range");
  if (cfg.combine != CombineMode::ItemOnly && user >= store.dims.n_users) {
    throw RangeError("item_interest_box: user out of range");
  }
  const std::size_t d = store.dims.dim;
  ItemBoxTrace t;
  t.item = item;
  t.user = user;
  t.combine = cfg.combine;
  const auto cs = concepts.concepts_of(item);
  t.concepts.assign(cs.begin(), cs.end());
  if (t.concepts.empty()) {
    t.fallback = true;
    const auto v = store.item(item);
    t.result = Box(Vec(v.begin(), v.end()), Vec(d, 0.0));
    return t;
  }
  t.projected = concept_boxes(item, store, concepts);
  const auto views = views_of(t.projected);
  if (cfg.combine != CombineMode::UserOnly) {
    t.inter_item = item_intersection_forward(views, store, cfg.variant);
  }
  if (cfg.combine != CombineMode::ItemOnly) {
    t.inter_user = user_bias_intersect_forward(views, store.user(user), store);
  }
  switch (cfg.combine) {
    case CombineMode::ItemOnly: t.result = t.inter_item.result; break;
    case CombineMode::UserOnly: t.result = t.inter_user.result; break;
    case CombineMode::Both:
      t.result = Box(d);
      for (std::size_t k = 0; k < d; ++k) {
        t.result.center[k] = 0.5 * (t.inter_item.result.center[k] + t.inter_user.result.center[k]);
        t.result.offset[k] = 0.5 * (t.inter_item.result.offset[k] + t.inter_user.result.offset[k]);
      }
      break;
  }
  return t;
}

Box item_interest_box(Id item, Id user, const ParamStore& store, const ConceptIndex& concepts,
                      const InterestConfig& cfg) {
  return item_interest_forward(item, user, store, concepts, cfg).result;
}

void item_interest_backward(const ItemBoxTrace& t, const ParamStore& store, ConstSpan d_center,
                            ConstSpan d_half, ParamTables& grads) {
  const std::size_t d = store.dims.dim;
  if (t.fallback) {
    add(grads.items.row(t.item), d_center);
    return;
  }
  const std::size_t n = t.projected.size();
  const auto views = views_of(t.projected);
  std::vector<Vec> dpc(n, Vec(d, 0.0)), dpo(n, Vec(d, 0.0));
  std::vector<BoxGrad> dboxes(n);
  for (std::size_t i = 0; i < n; ++i) dboxes[i] = {dpc[i], dpo[i]};

  const double share = t.combine == CombineMode::Both ? 0.5 : 1.0;
  Vec dc(d), dh(d);
  for (std::size_t k = 0; k < d; ++k) {
    dc[k] = share * d_center[k];
    dh[k] = share * d_half[k];
  }
  if (t.combine != CombineMode::UserOnly) {
    item_intersection_backward(t.inter_item, views, store, dc, dh, dboxes,
                               MutSpan(grads.attn_net));
  }
  if (t.combine != CombineMode::ItemOnly) {
    user_bias_intersect_backward(t.inter_user, views, store.user(t.user), store, dc, dh, dboxes,
                                 grads.users.row(t.user), MutSpan(grads.user_net));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = t.concepts[i];
    project_box_grad(store.tag(c.tag), dpc[i], dpo[i], ParamStore::split(grads.tags.row(c.tag)),
                     ParamStore::split(grads.relations.row(c.relation)));
  }
}

std::span<const Id> user_history(const InteractionGraph& graph, Id user, std::size_t cap) {
  if (user >= graph.n_users) throw RangeError("user_history: user out of range");
  std::span<const Id> h = graph.train_history[user];
  if (cap > 0 && h.size() > cap) h = h.subspan(h.size() - cap);
  return h;
}

Box mean_interest_box(std::span<const Id> items, Id user, const ParamStore& store,
                      const ConceptIndex& concepts, const InterestConfig& cfg) {
  if (items.empty()) throw ContractError("user_interest_box: empty interaction history");
  const std::size_t d = store.dims.dim;
  Box out(d);
  const double inv = 1.0 / static_cast<double>(items.size());
  for (Id item : items) {
    const Box b = item_interest_box(item, user, store, concepts, cfg);
    for (std::size_t k = 0; k < d; ++k) {
      out.center[k] += inv * b.center[k];
      out.offset[k] += inv * act(b.offset[k]);
    }
  }
  return out;
}

Box user_interest_box(Id user, const ParamStore& store, const Dataset& ds,
                      const InterestConfig& cfg) {
  return mean_interest_box(user_history(ds.graph, user, cfg.history_cap), user, store,
                           ds.concepts, cfg);
}

}  // namespace inbox
