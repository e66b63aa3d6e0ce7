#pragma once

// Trainable parameters and the box constructions built on them: concept
// projection, the two learned intersections, and item/user interest boxes.
// Every construction has a forward pass that records a trace and a backward
// pass that turns upstream gradients into parameter gradients.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inbox/geometry.hpp"
#include "inbox/kg_data.hpp"
#include "inbox/mlp.hpp"

namespace inbox {

struct ModelDims {
  std::size_t n_items = 0;
  std::size_t n_tags = 0;
  std::size_t n_relations = 0;  // augmented count
  std::size_t n_users = 0;
  std::size_t dim = 0;
  bool operator==(const ModelDims&) const = default;
};

// Architecture of every intersection network: hidden_layers layers of
// hidden_width units (0 means "embedding dimension").
struct IntersectionNetConfig {
  std::size_t hidden_layers = 1;
  std::size_t hidden_width = 0;
  Activation activation = Activation::Relu;
  bool operator==(const IntersectionNetConfig&) const = default;
};

class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  MutSpan row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstSpan row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vec& data() { return data_; }
  const Vec& data() const { return data_; }
  bool operator==(const Table&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

// All trainable arrays. Also used for gradients and optimizer moments.
struct ParamTables {
  Table items;      // n_items x d
  Table tags;       // n_tags x 2d   (center | offset)
  Table relations;  // n_relations x 2d
  Table users;      // n_users x d
  Vec attn_net;     // center, offset-inner, offset-outer networks
  Vec user_net;     // center, offset networks

  // Visits the arrays in checkpoint order.
  template <class F>
  void for_each(F&& f) {
    f("items", MutSpan(items.data()));
    f("tags", MutSpan(tags.data()));
    f("relations", MutSpan(relations.data()));
    f("users", MutSpan(users.data()));
    f("attn_net", MutSpan(attn_net));
    f("user_net", MutSpan(user_net));
  }
  template <class F>
  void for_each(F&& f) const {
    f("items", ConstSpan(items.data()));
    f("tags", ConstSpan(tags.data()));
    f("relations", ConstSpan(relations.data()));
    f("users", ConstSpan(users.data()));
    f("attn_net", ConstSpan(attn_net));
    f("user_net", ConstSpan(user_net));
  }

  std::size_t size() const;
  void set_zero();
  bool operator==(const ParamTables&) const = default;
};

ParamTables zeros_like(const ParamTables& p);

// Shapes and offsets of the five intersection networks.
struct NetLayout {
  MlpShape attn_center;  // d -> d, per-box center attention logits
  MlpShape attn_inner;   // d -> d, per-box offset features
  MlpShape attn_outer;   // d -> d, shrink gate logits
  MlpShape user_center;  // 2d -> d
  MlpShape user_offset;  // 2d -> d

  std::size_t attn_size() const;
  std::size_t user_size() const;

  template <class S>
  static S slice(S all, std::size_t off, const MlpShape& s) {
    return all.subspan(off, s.param_count());
  }
  template <class S> S attn_center_w(S a) const { return slice(a, 0, attn_center); }
  template <class S> S attn_inner_w(S a) const {
    return slice(a, attn_center.param_count(), attn_inner);
  }
  template <class S> S attn_outer_w(S a) const {
    return slice(a, attn_center.param_count() + attn_inner.param_count(), attn_outer);
  }
  template <class S> S user_center_w(S u) const { return slice(u, 0, user_center); }
  template <class S> S user_offset_w(S u) const {
    return slice(u, user_center.param_count(), user_offset);
  }
};

NetLayout make_net_layout(std::size_t dim, const IntersectionNetConfig& net);

struct ParamStore {
  ModelDims dims;
  double margin = 12.0;
  IntersectionNetConfig net;
  std::uint64_t seed = 0;
  int stage_completed = 0;
  ParamTables params;

  NetLayout layout() const { return make_net_layout(dims.dim, net); }

  PointView item(Id i) const { return params.items.row(i); }
  PointView user(Id u) const { return params.users.row(u); }
  BoxView tag(Id t) const { return split(params.tags.row(t)); }
  BoxView relation(Id r) const { return split(params.relations.row(r)); }

  static BoxView split(ConstSpan row) {
    const auto d = row.size() / 2;
    return {row.first(d), row.subspan(d)};
  }
  static BoxGrad split(MutSpan row) {
    const auto d = row.size() / 2;
    return {row.first(d), row.subspan(d)};
  }
};

// Initial scale s of centers and item points; 0 selects d / 8.
struct InitConfig {
  double margin = 12.0;
  double scale = 0.0;
  IntersectionNetConfig net;
};

// Centers, item points and user vectors ~ U(-margin/(2d) * s, +margin/(2d) * s),
// offsets ~ U(0, margin/d), network weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
// Values are rounded to float precision so checkpoints round-trip exactly.
ParamStore init_params(const ModelDims& dims, const InitConfig& cfg, std::uint64_t seed);

// Rounds every value to the nearest float.
void quantize_to_float(ParamTables& p);

// --- intersections ----------------------------------------------------------

struct AttentionTrace {
  Box result;                        // offset holds the (non-negative) half-width
  std::vector<Vec> weights;          // per box, per dimension softmax weights
  std::vector<MlpCache> center_cache;
  std::vector<MlpCache> inner_cache;
  MlpCache outer_cache;
  std::vector<std::size_t> argmin;   // per dimension, index of the smallest half-width
  Vec min_half;
  Vec gate;                          // g in (0, 1)
};

AttentionTrace attention_intersect_forward(std::span<const BoxView> boxes, const ParamStore& store);
Box attention_intersect(std::span<const BoxView> boxes, const ParamStore& store);
void attention_intersect_backward(const AttentionTrace& trace, std::span<const BoxView> boxes,
                                  const ParamStore& store, ConstSpan d_center, ConstSpan d_half,
                                  std::span<BoxGrad> dboxes, MutSpan d_attn_net);

struct UserBiasTrace {
  Box result;
  std::vector<Vec> center_weights;  // c_i
  std::vector<Vec> offset_weights;  // d_i
  std::vector<MlpCache> center_cache;
  std::vector<MlpCache> offset_cache;
};

UserBiasTrace user_bias_intersect_forward(std::span<const BoxView> boxes, PointView user,
                                          const ParamStore& store);
Box user_bias_intersect(std::span<const BoxView> boxes, PointView user, const ParamStore& store);
void user_bias_intersect_backward(const UserBiasTrace& trace, std::span<const BoxView> boxes,
                                  PointView user, const ParamStore& store, ConstSpan d_center,
                                  ConstSpan d_half, std::span<BoxGrad> dboxes, MutSpan d_user,
                                  MutSpan d_user_net);

// --- interest boxes ---------------------------------------------------------

enum class IntersectionVariant { Attention, MaxMin };
enum class CombineMode { Both, ItemOnly, UserOnly };
const char* to_string(IntersectionVariant v);
const char* to_string(CombineMode c);
IntersectionVariant parse_variant(const std::string& s);
CombineMode parse_combine(const std::string& s);

struct InterestConfig {
  IntersectionVariant variant = IntersectionVariant::Attention;
  CombineMode combine = CombineMode::Both;
  std::size_t history_cap = 64;
  bool operator==(const InterestConfig&) const = default;
};

// Concept boxes of an item: tag boxes projected by their relation boxes.
std::vector<Box> concept_boxes(Id item, const ParamStore& store, const ConceptIndex& concepts);

// Item-only intersection (b_interI) over an item's concept boxes.
struct ItemIntersectionTrace {
  IntersectionVariant variant = IntersectionVariant::Attention;
  AttentionTrace attention;
  Box result;
};

ItemIntersectionTrace item_intersection_forward(std::span<const BoxView> boxes,
                                                const ParamStore& store,
                                                IntersectionVariant variant);
void item_intersection_backward(const ItemIntersectionTrace& trace,
                                std::span<const BoxView> boxes, const ParamStore& store,
                                ConstSpan d_center, ConstSpan d_half, std::span<BoxGrad> dboxes,
                                MutSpan d_attn_net);

struct ItemBoxTrace {
  Id item = 0;
  Id user = 0;
  CombineMode combine = CombineMode::Both;
  bool fallback = false;  // no concepts: zero-width box at the item point
  std::vector<Concept> concepts;
  std::vector<Box> projected;
  ItemIntersectionTrace inter_item;
  UserBiasTrace inter_user;
  Box result;
};

ItemBoxTrace item_interest_forward(Id item, Id user, const ParamStore& store,
                                   const ConceptIndex& concepts, const InterestConfig& cfg);
Box item_interest_box(Id item, Id user, const ParamStore& store, const ConceptIndex& concepts,
                      const InterestConfig& cfg);
// Accumulates parameter gradients of the traced box into grads.
void item_interest_backward(const ItemBoxTrace& trace, const ParamStore& store,
                            ConstSpan d_center, ConstSpan d_half, ParamTables& grads);

// The last `cap` training items of a user in file order.
std::span<const Id> user_history(const InteractionGraph& graph, Id user, std::size_t cap);

// Mean of item interest boxes over the user's (truncated) history.
Box user_interest_box(Id user, const ParamStore& store, const Dataset& ds,
                      const InterestConfig& cfg);
// Same mean over an explicit item list.
Box mean_interest_box(std::span<const Id> items, Id user, const ParamStore& store,
                      const ConceptIndex& concepts, const InterestConfig& cfg);

}  // namespace inbox
