#pragma once

// Box algebra over axis-aligned boxes and points in R^d.
//
// A box is stored as (center, offset) where offset is the raw,
// pre-activation half-width. The effective half-width in every dimension is
// act(offset) = max(offset, 0), so a box always spans
// [center - act(offset), center + act(offset)] and is a closed set.
//
// Every distance has a matching *_grad function that accumulates
// scale * (sub)gradient into caller-provided buffers. Subgradient conventions:
//   d|x|/dx = 0 at x = 0, d max(x, 0)/dx = 0 at x = 0, and for elementwise
//   min/max over a sequence with ties the lowest index receives the gradient.

#include <cstddef>
#include <span>
#include <vector>

namespace inbox {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

using Point = Vec;
using PointView = ConstSpan;

// Non-negative activation applied to raw offsets.
inline constexpr double act(double x) noexcept { return x > 0.0 ? x : 0.0; }
inline constexpr double act_grad(double x) noexcept { return x > 0.0 ? 1.0 : 0.0; }
inline constexpr double sign(double x) noexcept {
  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

struct BoxView {
  ConstSpan center;
  ConstSpan offset;

  std::size_t dim() const noexcept { return center.size(); }
  double half_width(std::size_t k) const noexcept { return act(offset[k]); }
};

struct Box {
  Vec center;
  Vec offset;

  Box() = default;
  Box(Vec c, Vec o) : center(std::move(c)), offset(std::move(o)) {}
  // Zero-width box at the origin.
  explicit Box(std::size_t dim) : center(dim, 0.0), offset(dim, 0.0) {}

  std::size_t dim() const noexcept { return center.size(); }
  BoxView view() const noexcept { return {center, offset}; }
  operator BoxView() const noexcept { return view(); }  // NOLINT
};

// Mutable gradient destination for a box (either span may be empty to drop
// that part of the gradient).
struct BoxGrad {
  MutSpan center;
  MutSpan offset;
};

struct Corners {
  Vec lo;
  Vec hi;
};

Corners box_corners(BoxView b);

bool contains(BoxView b, PointView p);

// L1 distance between two points.
double dist_pp(PointView a, PointView c);

// Translate a point by the relation's center; the relation offset is unused.
Point project_point(PointView t, BoxView r);

// center' = center(t) + center(r); offset' = act(offset(t)) + offset(r).
Box project_box(BoxView t, BoxView r);

double dist_bb(BoxView a, BoxView c);
double dist_out(PointView p, BoxView b);
double dist_in(PointView p, BoxView b);
double dist_pb(PointView p, BoxView b);

// Analytic intersection from corner extrema. Disjoint members give a
// zero-width box at the midpoint of the crossed corners.
Box maxmin_intersect(std::span<const BoxView> boxes);
Box maxmin_intersect(std::span<const Box> boxes);

// --- subgradients --------------------------------------------------------

void dist_pp_grad(PointView a, PointView c, double scale, MutSpan da, MutSpan dc);
void dist_bb_grad(BoxView a, BoxView c, double scale, BoxGrad da, BoxGrad dc);
void dist_pb_grad(PointView p, BoxView b, double scale, MutSpan dp, BoxGrad db);

// Backward of project_box given the upstream gradient on the result.
void project_box_grad(BoxView t, ConstSpan d_center, ConstSpan d_offset,
                      BoxGrad dt, BoxGrad dr);

// Backward of maxmin_intersect. d_center/d_offset refer to the result;
// member gradients are written to dboxes[i] (same order as boxes).
void maxmin_intersect_grad(std::span<const BoxView> boxes, ConstSpan d_center,
                           ConstSpan d_offset, std::span<BoxGrad> dboxes);

}  // namespace inbox
