#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "inbox/errors.hpp"
#include "inbox/geometry.hpp"
#include "properties.hpp"

namespace inbox {
namespace {

Box box1(double c, double o) { return Box({c}, {o}); }

TEST(BoxCorners, Examples) {
  const Corners a = box_corners(Box({1, -2}, {0.5, -1}));
  EXPECT_EQ(a.lo, (Vec{0.5, -2}));
  EXPECT_EQ(a.hi, (Vec{1.5, -2}));

  const Corners b = box_corners(Box({0.25, 7}, {-1, 0}));
  EXPECT_EQ(b.lo, (Vec{0.25, 7}));
  EXPECT_EQ(b.hi, (Vec{0.25, 7}));

  const Corners c = box_corners(box1(0, 3));
  EXPECT_EQ(c.lo, Vec{-3});
  EXPECT_EQ(c.hi, Vec{3});
}

TEST(BoxCorners, RejectsNonFinite) {
  EXPECT_THROW(box_corners(box1(std::numeric_limits<double>::quiet_NaN(), 1)),
               InvalidValueError);
  EXPECT_THROW(box_corners(box1(0, std::numeric_limits<double>::infinity())),
               InvalidValueError);
}

TEST(Contains, ClosedBoundary) {
  const Box b = box1(1, 1);  // [0, 2]
  EXPECT_TRUE(contains(b, Vec{1}));
  EXPECT_TRUE(contains(b, Vec{2}));
  EXPECT_TRUE(contains(b, Vec{0}));
  EXPECT_FALSE(contains(b, Vec{2.1}));
  EXPECT_THROW(contains(b, Vec{1, 1}), ContractError);
}

TEST(DistPP, Examples) {
  EXPECT_EQ(dist_pp(Vec{3, 4}, Vec{3, 4}), 0.0);
  EXPECT_EQ(dist_pp(Vec{0, 0}, Vec{1, -2}), 3.0);
  EXPECT_EQ(dist_pp(Vec{1}, Vec{4}), 3.0);
  EXPECT_THROW(dist_pp(Vec{1}, Vec{1, 2}), ContractError);
}

TEST(ProjectPoint, AddsRelationCenterOnly) {
  EXPECT_EQ(project_point(Vec{1, 1}, Box({0, 0}, {5, 5})), (Vec{1, 1}));
  EXPECT_EQ(project_point(Vec{1, 2}, Box({-1, 3}, {-2, 9})), (Vec{0, 5}));
  EXPECT_EQ(project_point(Vec{0}, box1(12, 0)), Vec{12});
  EXPECT_THROW(project_point(Vec{0, 0}, box1(1, 1)), ContractError);
}

TEST(ProjectBox, Examples) {
  const Box id = project_box(Box({0.5, -1}, {2, 0.25}), Box({0, 0}, {0, 0}));
  EXPECT_EQ(id.center, (Vec{0.5, -1}));
  EXPECT_EQ(id.offset, (Vec{2, 0.25}));

  const Box a = project_box(box1(1, 2), box1(1, -1));
  EXPECT_EQ(a.center, Vec{2});
  EXPECT_EQ(a.offset, Vec{1});

  const Box b = project_box(box1(0, -5), box1(0, 0.5));
  EXPECT_EQ(b.offset, Vec{0.5});

  // Relation offsets may narrow below zero.
  const Box c = project_box(box1(0, 0.5), box1(0, -2));
  EXPECT_EQ(c.offset, Vec{-1.5});
}

TEST(DistBB, Examples) {
  const Box a = box1(0, 1);
  EXPECT_EQ(dist_bb(a, a), 0.0);
  EXPECT_EQ(dist_bb(box1(0, 1), box1(1, 2)), 2.0);
  EXPECT_EQ(dist_bb(box1(0, -1), box1(0, -2)), 0.0);
}

TEST(DistOut, Examples) {
  const Box b = box1(1, 1);
  EXPECT_EQ(dist_out(Vec{1.5}, b), 0.0);
  EXPECT_EQ(dist_out(Vec{2}, b), 0.0);
  EXPECT_EQ(dist_out(Vec{3}, b), 1.0);
  EXPECT_EQ(dist_out(Vec{3, -1}, Box({1, 1}, {1, 1})), 2.0);
}

TEST(DistIn, Examples) {
  const Box b = box1(1, 1);
  EXPECT_EQ(dist_in(Vec{1}, b), 0.0);
  EXPECT_EQ(dist_in(Vec{1.5}, b), 0.5);
  EXPECT_EQ(dist_in(Vec{3}, b), 1.0);
}

TEST(DistPB, Examples) {
  const Box b = box1(1, 1);
  EXPECT_EQ(dist_pb(Vec{1}, b), 0.0);
  EXPECT_EQ(dist_pb(Vec{3}, b), 2.0);
  EXPECT_EQ(dist_pb(Vec{1.5}, b), 0.5);
}

TEST(MaxMin, Examples) {
  const std::vector<Box> one{box1(1, 1)};
  const Box a = maxmin_intersect(std::span<const Box>(one));
  EXPECT_EQ(a.center, Vec{1});
  EXPECT_EQ(a.offset, Vec{1});

  const std::vector<Box> overlap{box1(1, 1), box1(2, 1)};
  const Box b = maxmin_intersect(std::span<const Box>(overlap));
  EXPECT_EQ(b.center, Vec{1.5});
  EXPECT_EQ(b.offset, Vec{0.5});

  const std::vector<Box> disjoint{box1(0.5, 0.5), box1(2.5, 0.5)};
  const Box c = maxmin_intersect(std::span<const Box>(disjoint));
  EXPECT_EQ(c.center, Vec{1.5});
  EXPECT_EQ(c.offset, Vec{0});

  EXPECT_THROW(maxmin_intersect(std::span<const Box>()), ContractError);
}

TEST(MaxMin, UsesRawCornersForNegativeCenters) {
  const std::vector<Box> boxes{box1(-3, 1), box1(-2.5, 1)};
  const Box r = maxmin_intersect(std::span<const Box>(boxes));
  EXPECT_EQ(r.center, Vec{-2.75});
  EXPECT_EQ(r.offset, Vec{0.75});
}

// Subgradient conventions at kinks: zero for |x| and max(x, 0), lowest
// index for ties in min/max.
TEST(Subgradients, KinkConventions) {
  Vec da(1, 0.0), dc(1, 0.0);
  dist_pp_grad(Vec{2}, Vec{2}, 1.0, da, dc);
  EXPECT_EQ(da[0], 0.0);
  EXPECT_EQ(dc[0], 0.0);

  Vec ac(1, 0.0), ao(1, 0.0);
  dist_bb_grad(box1(0, 0), box1(1, -1), 1.0, {ac, ao}, {});
  EXPECT_EQ(ac[0], -1.0);
  EXPECT_EQ(ao[0], 0.0);  // act'(0) = 0

  const std::vector<Box> tied{box1(0, 1), box1(0, 1)};
  std::vector<BoxView> views(tied.begin(), tied.end());
  Vec c0(1, 0.0), o0(1, 0.0), c1(1, 0.0), o1(1, 0.0);
  std::vector<BoxGrad> g{{c0, o0}, {c1, o1}};
  maxmin_intersect_grad(views, Vec{1}, Vec{1}, g);
  EXPECT_EQ(c0[0], 1.0);
  EXPECT_EQ(o0[0], 1.0);
  EXPECT_EQ(c1[0], 0.0);
  EXPECT_EQ(o1[0], 0.0);
}

TEST(GeometryProperties, RandomizedSuite) {
  for (const auto& r : testing::geometry_properties(10000, 2024)) {
    EXPECT_GT(r.cases, 0u) << r.name;
    EXPECT_EQ(r.violations, 0u) << r.name << ": " << r.first_failure;
  }
}

}  // namespace
}  // namespace inbox
