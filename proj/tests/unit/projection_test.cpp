#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "inbox/errors.hpp"
#include "inbox/projection.hpp"
#include "toy.hpp"

namespace inbox {
namespace {

std::vector<Vec> fixture_points() {
  return {{2.0, 0.1, -1.0},  {-1.5, 0.4, 0.2}, {0.3, -2.2, 0.9}, {3.1, 1.0, -0.4},
          {-2.4, -0.3, 0.5}, {0.9, 1.8, -1.6}, {-0.7, -1.1, 1.2}, {1.6, 0.2, 0.0},
          {-3.0, 0.6, 0.8},  {0.4, -0.9, -0.3}};
}

TEST(Pca, MatchesDenseEigenSolver) {
  const auto pts = fixture_points();
  const auto r = pca_power(pts);

  Eigen::MatrixXd x(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = pts[i][k];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  ASSERT_EQ(r.components.size(), 2u);
  for (int c = 0; c < 2; ++c) {
    const Eigen::Index col = 2 - c;  // eigenvalues come in ascending order
    EXPECT_NEAR(r.variances[c], es.eigenvalues()(col), 1e-6);
    Eigen::VectorXd v = es.eigenvectors().col(col);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(r.components[c][k], v(k), 1e-6);
    const Eigen::VectorXd proj = centered * v;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_NEAR(r.projected[i][c], proj(static_cast<Eigen::Index>(i)), 1e-6);
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.mean[k], mean(static_cast<Eigen::Index>(k)), 1e-12);
  }
}

TEST(Pca, PlanarPointsKeepPairwiseDistances) {
  std::vector<Vec> pts;
  for (int i = 0; i < 12; ++i) {
    const double t = 0.5 * i;
    pts.push_back({std::cos(t) * (1.0 + 0.1 * i), 2.0 * std::sin(t)});
  }
  const auto r = pca_power(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double a = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
      const double b = std::hypot(r.projected[i][0] - r.projected[j][0],
                                  r.projected[i][1] - r.projected[j][1]);
      EXPECT_NEAR(a, b, 1e-6);
    }
  }
}

TEST(Pca, EmptyInputRejected) {
  EXPECT_THROW(pca_power({}), ContractError);
}

TEST(Projection, LabelsPartitionLinkedAndRandomItems) {
  const Dataset ds = testing::toy_dataset();
  const ParamStore store = testing::toy_store(ds, 4, 3);
  const Concept c = ds.concepts.concepts_of(4)[0];
  const auto rows = export_projection(store, ds, c, 2, 9);
  const auto linked = ds.concepts.items_of(c);
  std::size_t n_linked = 0;
  std::vector<Id> seen;
  for (const auto& r : rows) {
    const bool in = std::binary_search(linked.begin(), linked.end(), r.item);
    EXPECT_EQ(r.linked, in);
    n_linked += r.linked ? 1 : 0;
    seen.push_back(r.item);
  }
  EXPECT_EQ(n_linked, linked.size());
  EXPECT_EQ(rows.size(), linked.size() + 2);
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());

  std::ostringstream os;
  write_projection_csv(rows, os);
  EXPECT_EQ(os.str().rfind("item_id,x,y,label\n", 0), 0u);
  EXPECT_THROW(export_projection(store, ds, Concept{99, 99}, 2, 9), DataError);
}

}  // namespace
}  // namespace inbox
