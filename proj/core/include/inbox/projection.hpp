#pragma once

// Two-dimensional PCA export of item points for visual inspection.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

#include "inbox/geometry.hpp"
#include "inbox/kg_data.hpp"
#include "inbox/model.hpp"

namespace inbox {

struct PcaOptions {
  std::size_t components = 2;
  double tolerance = 1e-8;
  std::size_t max_iterations = 1000;
};

struct PcaResult {
  Vec mean;
  std::vector<Vec> components;   // unit vectors, largest variance first
  std::vector<double> variances; // eigenvalues of the covariance
  std::vector<Vec> projected;    // one row per input point
};

// Power iteration with deflation on the (1/n) covariance. Each component's
// sign is fixed so that its largest-magnitude entry is positive.
PcaResult pca_power(const std::vector<Vec>& points, const PcaOptions& opts = {});

struct ProjectionRow {
  Id item = 0;
  double x = 0.0;
  double y = 0.0;
  bool linked = false;  // true: item carries the concept
};

// Items linked to the concept plus up to n_random unlinked items drawn
// without replacement. Throws DataError for a concept with no items.
std::vector<ProjectionRow> export_projection(const ParamStore& store, const Dataset& ds,
                                             Concept target, std::size_t n_random,
                                             std::uint64_t seed);

// Header "item_id,x,y,label" with label "concept" or "random".
void write_projection_csv(const std::vector<ProjectionRow>& rows, std::ostream& out);

}  // namespace inbox
