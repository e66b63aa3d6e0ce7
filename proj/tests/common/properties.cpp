#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "inbox/checkpoint.hpp"
#include "inbox/errors.hpp"
#include "inbox/model.hpp"
#include "toy.hpp"

namespace inbox::testing {
namespace {

void record(PropertyResult& r, bool ok, const std::string& what) {
  ++r.cases;
  if (ok) return;
  if (r.violations++ == 0) r.first_failure = what;
}

double half_sum(const Box& b) {
  double s = 0.0;
  for (double o : b.offset) s += act(o);
  return s;
}

std::string describe(const Box& b, PointView p) {
  std::ostringstream os;
  os.precision(17);
  os << "c=(";
  for (double v : b.center) os << v << ' ';
  os << ") o=(";
  for (double v : b.offset) os << v << ' ';
  os << ") p=(";
  for (double v : p) os << v << ' ';
  os << ')';
  return os.str();
}

// Boxes sharing an anchor point so their intersection is usually a proper box.
std::vector<Box> overlapping_boxes(std::size_t n, std::size_t d, Rng& rng) {
  const Point anchor = random_point(d, rng, 1.0);
  std::vector<Box> out;
  for (std::size_t i = 0; i < n; ++i) {
    Box b(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double h = rng.uniform(0.2, 1.5);
      b.center[k] = anchor[k] + rng.uniform(-0.8 * h, 0.8 * h);
      b.offset[k] = h;
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

Box random_box(std::size_t d, Rng& rng) {
  Box b(d);
  for (std::size_t k = 0; k < d; ++k) {
    b.center[k] = rng.uniform(-2.0, 2.0);
    b.offset[k] = rng.uniform(-0.5, 1.5);
  }
  return b;
}

Point random_point(std::size_t d, Rng& rng, double range) {
  Point p(d);
  for (auto& v : p) v = rng.uniform(-range, range);
  return p;
}

std::vector<PropertyResult> geometry_properties(std::size_t cases, std::uint64_t seed) {
  Rng rng(seed);
  PropertyResult contain{"containment iff zero outside distance"};
  PropertyResult in_bound{"inside distance bounded by total half-width"};
  PropertyResult pb_zero{"point-box distance zero iff point is the center"};
  PropertyResult maxmin{"max-min membership matches every member (Monte-Carlo)"};
  PropertyResult perm{"max-min permutation invariance and idempotence"};
  PropertyResult metric{"point and box distances symmetric with triangle inequality"};
  PropertyResult identity{"distances non-negative and zero on identity inputs"};

  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t d = 1 + rng.below(6);
    const Box b = random_box(d, rng);
    const Corners cr = box_corners(b);

    // Points on corners, at the center or anywhere, to exercise boundaries.
    Point p = random_point(d, rng);
    for (std::size_t k = 0; k < d; ++k) {
      const auto pick = rng.below(6);
      if (pick == 0) p[k] = cr.lo[k];
      if (pick == 1) p[k] = cr.hi[k];
      if (pick == 2) p[k] = b.center[k];
    }
    record(contain, contains(b, p) == (dist_out(p, b) == 0.0), describe(b, p));

    const double din = dist_in(p, b);
    const double hs = half_sum(b);
    const double tol = 1e-12 * (1.0 + hs + std::abs(din));
    record(in_bound, din >= 0.0 && din <= hs + tol, describe(b, p));
    // Beyond the far corner in every dimension the bound is attained.
    Point far = b.center;
    for (std::size_t k = 0; k < d; ++k) {
      far[k] = rng.bernoulli(0.5) ? cr.hi[k] + rng.uniform(0.0, 2.0)
                                  : cr.lo[k] - rng.uniform(0.0, 2.0);
    }
    record(in_bound, std::abs(dist_in(far, b) - hs) <= tol, describe(b, far));

    const bool at_center = rng.bernoulli(0.3);
    const Point q = at_center ? b.center : p;
    record(pb_zero, (dist_pb(q, b) == 0.0) == (q == b.center), describe(b, q));

    // Max-min against membership of every member.
    const std::size_t n = 2 + rng.below(3);
    auto boxes = overlapping_boxes(n, d, rng);
    const Box inter = maxmin_intersect(std::span<const Box>(boxes));
    const Corners ic = box_corners(inter);
    bool proper = true;
    for (std::size_t k = 0; k < d; ++k) proper = proper && ic.hi[k] - ic.lo[k] > 1e-9;
    if (proper) {
      bool ok = true;
      std::string fail;
      for (int s = 0; s < 1000 && ok; ++s) {
        Point x(d);
        for (std::size_t k = 0; k < d; ++k) {
          const double w = ic.hi[k] - ic.lo[k];
          x[k] = rng.uniform(ic.lo[k] - 0.5 * w, ic.hi[k] + 0.5 * w);
        }
        const bool all = std::all_of(boxes.begin(), boxes.end(),
                                     [&](const Box& m) { return contains(m, x); });
        if (all != contains(inter, x)) {
          ok = false;
          fail = describe(inter, x);
        }
      }
      record(maxmin, ok, fail);
    }

    auto shuffled = boxes;
    rng.shuffle(shuffled.begin(), shuffled.end());
    auto doubled = boxes;
    doubled.insert(doubled.end(), boxes.begin(), boxes.end());
    const Box a1 = maxmin_intersect(std::span<const Box>(shuffled));
    const Box a2 = maxmin_intersect(std::span<const Box>(doubled));
    const Box single = maxmin_intersect(std::span<const Box>(&b, 1));
    const Corners sc = box_corners(single);
    bool same_single = true;
    for (std::size_t k = 0; k < d; ++k) {
      same_single = same_single && std::abs(sc.lo[k] - cr.lo[k]) <= 1e-12 &&
                    std::abs(sc.hi[k] - cr.hi[k]) <= 1e-12;
    }
    record(perm,
           a1.center == inter.center && a1.offset == inter.offset && a2.center == inter.center &&
               a2.offset == inter.offset && same_single,
           "max-min order or repetition changed the result");

    // L1 metric axioms on points and boxes.
    const Point u = random_point(d, rng), v = random_point(d, rng), w = random_point(d, rng);
    const Box x = random_box(d, rng), y = random_box(d, rng), z = random_box(d, rng);
    const double eps = 1e-12;
    bool m_ok = dist_pp(u, v) == dist_pp(v, u) && dist_bb(x, y) == dist_bb(y, x) &&
                dist_pp(u, w) <= dist_pp(u, v) + dist_pp(v, w) + eps &&
                dist_bb(x, z) <= dist_bb(x, y) + dist_bb(y, z) + eps;
    record(metric, m_ok, "symmetry or triangle inequality");

    bool id_ok = dist_pp(u, u) == 0.0 && dist_bb(x, x) == 0.0 &&
                 dist_out(x.center, x) == 0.0 && dist_in(x.center, x) == 0.0 &&
                 dist_pb(x.center, x) == 0.0 && dist_pp(u, v) >= 0.0 && dist_bb(x, y) >= 0.0 &&
                 dist_out(u, x) >= 0.0 && dist_in(u, x) >= 0.0 && dist_pb(u, x) >= 0.0;
    record(identity, id_ok, describe(x, u));
  }
  return {contain, in_bound, pb_zero, maxmin, perm, metric, identity};
}

std::vector<PropertyResult> intersection_properties(std::size_t cases, std::uint64_t seed) {
  Rng rng(seed);
  PropertyResult attn_sum{"attention weights sum to one per dimension"};
  PropertyResult user_sum{"user-bias weights sum to one per dimension"};
  PropertyResult shrink{"attention half-width at most the smallest member half-width"};

  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t d = 2 + rng.below(15);
    ModelDims dims{1, 1, 2, 1, d};
    InitConfig init;
    init.net.hidden_layers = 1 + rng.below(2);
    ParamStore store = init_params(dims, init, rng.next_u64());
    const std::size_t n = 1 + rng.below(5);
    std::vector<Box> boxes;
    for (std::size_t i = 0; i < n; ++i) boxes.push_back(random_box(d, rng));
    std::vector<BoxView> views(boxes.begin(), boxes.end());
    const Point user = random_point(d, rng, 1.0);

    const auto at = attention_intersect_forward(views, store);
    const auto ut = user_bias_intersect_forward(views, user, store);
    bool a_ok = true, u_ok = true, s_ok = true;
    for (std::size_t k = 0; k < d; ++k) {
      double sa = 0.0, sc = 0.0, so = 0.0;
      double min_half = act(boxes[0].offset[k]);
      for (std::size_t i = 0; i < n; ++i) {
        a_ok = a_ok && at.weights[i][k] >= 0.0;
        u_ok = u_ok && ut.center_weights[i][k] >= 0.0 && ut.offset_weights[i][k] >= 0.0;
        sa += at.weights[i][k];
        sc += ut.center_weights[i][k];
        so += ut.offset_weights[i][k];
        min_half = std::min(min_half, act(boxes[i].offset[k]));
      }
      a_ok = a_ok && std::abs(sa - 1.0) < 1e-6;
      u_ok = u_ok && std::abs(sc - 1.0) < 1e-6 && std::abs(so - 1.0) < 1e-6;
      s_ok = s_ok && at.result.offset[k] >= 0.0 && at.result.offset[k] <= min_half;
    }
    record(attn_sum, a_ok, "d=" + std::to_string(d) + " n=" + std::to_string(n));
    record(user_sum, u_ok, "d=" + std::to_string(d) + " n=" + std::to_string(n));
    record(shrink, s_ok, "d=" + std::to_string(d) + " n=" + std::to_string(n));
  }
  return {attn_sum, user_sum, shrink};
}

namespace {

Checkpoint toy_checkpoint(std::uint64_t seed) {
  const Dataset ds = toy_dataset();
  Checkpoint ck;
  ck.store = toy_store(ds, 4, seed);
  ck.store.stage_completed = 2;
  OptimizerState opt;
  opt.step = 17;
  opt.m = zeros_like(ck.store.params);
  opt.v = zeros_like(ck.store.params);
  Rng rng(seed + 1);
  opt.m.for_each([&](const char*, MutSpan s) {
    for (auto& x : s) x = rng.uniform(-1.0, 1.0);
  });
  opt.v.for_each([&](const char*, MutSpan s) {
    for (auto& x : s) x = rng.uniform(0.0, 1.0);
  });
  ck.optimizer = std::move(opt);
  return ck;
}

// 0: rejected with CorruptCheckpointError, 1: accepted, 2: other exception.
int try_parse(std::string_view bytes) {
  try {
    parse_checkpoint(bytes);
    return 1;
  } catch (const CorruptCheckpointError&) {
    return 0;
  } catch (...) {
    return 2;
  }
}

}  // namespace

PropertyResult checkpoint_fuzz(std::size_t truncations, std::size_t bit_flips,
                               std::uint64_t seed) {
  PropertyResult r{"corrupted checkpoints rejected"};
  const std::string bytes = serialize_checkpoint(toy_checkpoint(seed));
  Rng rng(seed);
  for (std::size_t i = 0; i < truncations; ++i) {
    const std::size_t len = rng.below(bytes.size());
    const int res = try_parse(std::string_view(bytes).substr(0, len));
    record(r, res == 0, "truncation to " + std::to_string(len) + " bytes: result " +
                            std::to_string(res));
  }
  for (std::size_t i = 0; i < bit_flips; ++i) {
    std::string bad = bytes;
    const std::size_t pos = rng.below(bad.size());
    const int bit = static_cast<int>(rng.below(8));
    bad[pos] = static_cast<char>(bad[pos] ^ (1 << bit));
    const int res = try_parse(bad);
    record(r, res == 0, "bit " + std::to_string(bit) + " of byte " + std::to_string(pos) +
                            ": result " + std::to_string(res));
  }
  return r;
}

PropertyResult checkpoint_round_trip(std::uint64_t seed) {
  PropertyResult r{"checkpoint round trip is bit-exact"};
  const Checkpoint ck = toy_checkpoint(seed);
  const std::string first = serialize_checkpoint(ck);
  const Checkpoint back = parse_checkpoint(first);
  const std::string second = serialize_checkpoint(back);
  record(r, first == second, "re-serialized bytes differ");
  record(r, back.store.params == ck.store.params, "parameters differ");
  record(r, back.optimizer.has_value() && *back.optimizer == *ck.optimizer,
         "optimizer state differs");
  record(r,
         back.store.dims == ck.store.dims && back.store.margin == ck.store.margin &&
             back.store.seed == ck.store.seed &&
             back.store.stage_completed == ck.store.stage_completed &&
             back.store.net == ck.store.net && back.interest == ck.interest,
         "header fields differ");
  return r;
}

std::vector<MetricFixture> metric_fixtures() {
  return {
      {{1, 2, 3}, {1, 2}, 1.0, 1.0},
      {{4, 5}, {1}, 0.0, 0.0},
      {{1, 9, 2, 8}, {1, 2, 3, 4}, 0.5, 0.5855700749881525},
      {{7, 3}, {3}, 1.0, 0.6309297535714575},
      {{5, 6, 7}, {7, 100, 200, 300, 400}, 0.2, 0.23463936301137822},
      {{9, 1, 2}, {1, 2}, 1.0, 0.6934264036172708},
  };
}

}  // namespace inbox::testing
