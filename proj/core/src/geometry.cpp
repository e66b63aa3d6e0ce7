#include "inbox/geometry.hpp"

#include <cmath>
#include <string>

#include "inbox/errors.hpp"

namespace inbox {
namespace {

void require_dim(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ContractError(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                        " vs " + std::to_string(b) + ")");
  }
}

void require_box(BoxView b, const char* op) { require_dim(b.center.size(), b.offset.size(), op); }

void add_to(MutSpan dst, std::size_t k, double v) {
  if (!dst.empty()) dst[k] += v;
}

}  // namespace

Corners box_corners(BoxView b) {
  require_box(b, "box_corners");
  Corners out{Vec(b.dim()), Vec(b.dim())};
  for (std::size_t k = 0; k < b.dim(); ++k) {
    if (!std::isfinite(b.center[k]) || !std::isfinite(b.offset[k])) {
      throw InvalidValueError("box_corners: non-finite coordinate in dimension " +
                              std::to_string(k));
    }
    const double h = act(b.offset[k]);
    out.lo[k] = b.center[k] - h;
    out.hi[k] = b.center[k] + h;
  }
  return out;
}

bool contains(BoxView b, PointView p) {
  require_box(b, "contains");
  require_dim(b.dim(), p.size(), "contains");
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double h = act(b.offset[k]);
    if (p[k] < b.center[k] - h || p[k] > b.center[k] + h) return false;
  }
  return true;
}

double dist_pp(PointView a, PointView c) {
  require_dim(a.size(), c.size(), "dist_pp");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - c[k]);
  return s;
}

Point project_point(PointView t, BoxView r) {
  require_dim(t.size(), r.dim(), "project_point");
  Point out(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) out[k] = t[k] + r.center[k];
  return out;
}

Box project_box(BoxView t, BoxView r) {
  require_box(t, "project_box");
  require_box(r, "project_box");
  require_dim(t.dim(), r.dim(), "project_box");
  Box out(t.dim());
  for (std::size_t k = 0; k < t.dim(); ++k) {
    out.center[k] = t.center[k] + r.center[k];
    out.offset[k] = act(t.offset[k]) + r.offset[k];
  }
  return out;
}

double dist_bb(BoxView a, BoxView c) {
  require_box(a, "dist_bb");
  require_box(c, "dist_bb");
  require_dim(a.dim(), c.dim(), "dist_bb");
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    s += std::abs(a.center[k] - c.center[k]);
    s += std::abs(act(a.offset[k]) - act(c.offset[k]));
  }
  return s;
}

double dist_out(PointView p, BoxView b) {
  require_box(b, "dist_out");
  require_dim(p.size(), b.dim(), "dist_out");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double h = act(b.offset[k]);
    s += act(p[k] - (b.center[k] + h)) + act((b.center[k] - h) - p[k]);
  }
  return s;
}

double dist_in(PointView p, BoxView b) {
  require_box(b, "dist_in");
  require_dim(p.size(), b.dim(), "dist_in");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double h = act(b.offset[k]);
    const double lo = b.center[k] - h;
    const double hi = b.center[k] + h;
    const double q = std::min(hi, std::max(lo, p[k]));
    s += std::abs(b.center[k] - q);
  }
  return s;
}

double dist_pb(PointView p, BoxView b) {
  require_box(b, "dist_pb");
  require_dim(p.size(), b.dim(), "dist_pb");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double c = b.center[k];
    const double h = act(b.offset[k]);
    const double lo = c - h;
    const double hi = c + h;
    const double q = std::min(hi, std::max(lo, p[k]));
    s += act(p[k] - hi) + act(lo - p[k]) + std::abs(c - q);
  }
  return s;
}

Box maxmin_intersect(std::span<const BoxView> boxes) {
  if (boxes.empty()) throw ContractError("maxmin_intersect: empty box sequence");
  const std::size_t d = boxes.front().dim();
  for (const auto& b : boxes) {
    require_box(b, "maxmin_intersect");
    require_dim(b.dim(), d, "maxmin_intersect");
  }
  Box out(d);
  for (std::size_t k = 0; k < d; ++k) {
    double hi = boxes[0].center[k] + boxes[0].half_width(k);
    double lo = boxes[0].center[k] - boxes[0].half_width(k);
    for (std::size_t i = 1; i < boxes.size(); ++i) {
      const double h = boxes[i].half_width(k);
      hi = std::min(hi, boxes[i].center[k] + h);
      lo = std::max(lo, boxes[i].center[k] - h);
    }
    out.center[k] = 0.5 * (hi + lo);
    out.offset[k] = 0.5 * act(hi - lo);
  }
  return out;
}

Box maxmin_intersect(std::span<const Box> boxes) {
  std::vector<BoxView> views(boxes.begin(), boxes.end());
  return maxmin_intersect(std::span<const BoxView>(views));
}

void dist_pp_grad(PointView a, PointView c, double scale, MutSpan da, MutSpan dc) {
  require_dim(a.size(), c.size(), "dist_pp_grad");
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double g = scale * sign(a[k] - c[k]);
    add_to(da, k, g);
    add_to(dc, k, -g);
  }
}

void dist_bb_grad(BoxView a, BoxView c, double scale, BoxGrad da, BoxGrad dc) {
  require_dim(a.dim(), c.dim(), "dist_bb_grad");
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double gc = scale * sign(a.center[k] - c.center[k]);
    add_to(da.center, k, gc);
    add_to(dc.center, k, -gc);
    const double go = scale * sign(act(a.offset[k]) - act(c.offset[k]));
    add_to(da.offset, k, go * act_grad(a.offset[k]));
    add_to(dc.offset, k, -go * act_grad(c.offset[k]));
  }
}

void dist_pb_grad(PointView p, BoxView b, double scale, MutSpan dp, BoxGrad db) {
  require_dim(p.size(), b.dim(), "dist_pb_grad");
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double c = b.center[k];
    const double h = act(b.offset[k]);
    const double lo = c - h;
    const double hi = c + h;
    double g_p = 0.0, g_c = 0.0, g_lo = 0.0, g_hi = 0.0;

    // outside part
    if (p[k] - hi > 0.0) {
      g_p += 1.0;
      g_hi -= 1.0;
    }
    if (lo - p[k] > 0.0) {
      g_lo += 1.0;
      g_p -= 1.0;
    }

    // inside part: |c - min(hi, max(lo, p))|, ties resolve to the first argument
    const double inner = std::max(lo, p[k]);
    const bool inner_is_lo = lo >= p[k];
    const bool q_is_hi = hi <= inner;
    const double q = q_is_hi ? hi : inner;
    const double s = sign(c - q);
    g_c += s;
    const double g_q = -s;
    if (q_is_hi) {
      g_hi += g_q;
    } else if (inner_is_lo) {
      g_lo += g_q;
    } else {
      g_p += g_q;
    }

    // lo = c - h, hi = c + h
    g_c += g_lo + g_hi;
    const double g_h = g_hi - g_lo;
    add_to(dp, k, scale * g_p);
    add_to(db.center, k, scale * g_c);
    add_to(db.offset, k, scale * g_h * act_grad(b.offset[k]));
  }
}

void project_box_grad(BoxView t, ConstSpan d_center, ConstSpan d_offset, BoxGrad dt,
                      BoxGrad dr) {
  for (std::size_t k = 0; k < t.dim(); ++k) {
    add_to(dt.center, k, d_center[k]);
    add_to(dr.center, k, d_center[k]);
    add_to(dr.offset, k, d_offset[k]);
    add_to(dt.offset, k, d_offset[k] * act_grad(t.offset[k]));
  }
}

void maxmin_intersect_grad(std::span<const BoxView> boxes, ConstSpan d_center,
                           ConstSpan d_offset, std::span<BoxGrad> dboxes) {
  if (boxes.empty()) throw ContractError("maxmin_intersect_grad: empty box sequence");
  require_dim(boxes.size(), dboxes.size(), "maxmin_intersect_grad");
  const std::size_t d = boxes.front().dim();
  for (std::size_t k = 0; k < d; ++k) {
    std::size_t i_hi = 0, i_lo = 0;
    double hi = boxes[0].center[k] + boxes[0].half_width(k);
    double lo = boxes[0].center[k] - boxes[0].half_width(k);
    for (std::size_t i = 1; i < boxes.size(); ++i) {
      const double h = boxes[i].half_width(k);
      if (boxes[i].center[k] + h < hi) {
        hi = boxes[i].center[k] + h;
        i_hi = i;
      }
      if (boxes[i].center[k] - h > lo) {
        lo = boxes[i].center[k] - h;
        i_lo = i;
      }
    }
    const double g_width = 0.5 * d_offset[k] * act_grad(hi - lo);
    const double g_hi = 0.5 * d_center[k] + g_width;
    const double g_lo = 0.5 * d_center[k] - g_width;
    // hi_i = c_i + act(o_i), lo_i = c_i - act(o_i)
    add_to(dboxes[i_hi].center, k, g_hi);
    add_to(dboxes[i_hi].offset, k, g_hi * act_grad(boxes[i_hi].offset[k]));
    add_to(dboxes[i_lo].center, k, g_lo);
    add_to(dboxes[i_lo].offset, k, -g_lo * act_grad(boxes[i_lo].offset[k]));
  }
}

}  // namespace inbox
