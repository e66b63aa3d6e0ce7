#include "inbox/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "inbox/errors.hpp"
#include "inbox/rng.hpp"

namespace inbox {
namespace {

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec mat_vec(const std::vector<Vec>& m, const Vec& v) {
  Vec out(v.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  }
  return out;
}

void fix_sign(Vec& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

// A unit vector orthogonal to every vector in `basis` (Gram-Schmidt over the
// standard basis).
Vec orthogonal_to(const std::vector<Vec>& basis, std::size_t dim) {
  for (std::size_t e = 0; e < dim; ++e) {
    Vec v(dim, 0.0);
    v[e] = 1.0;
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
    }
    const double n = norm(v);
    if (n > 1e-6) {
      for (double& x : v) x /= n;
      return v;
    }
  }
  return Vec(dim, 0.0);
}

}  // namespace

PcaResult pca_power(const std::vector<Vec>& points, const PcaOptions& opts) {
  if (points.empty()) throw ContractError("pca: no points");
  const std::size_t d = points.front().size();
  for (const auto& p : points) {
    if (p.size() != d) throw ContractError("pca: points differ in dimension");
  }
  const std::size_t n_comp = std::min(opts.components, d);
  const double n = static_cast<double>(points.size());

  PcaResult r;
  r.mean.assign(d, 0.0);
  for (const auto& p : points) {
    for (std::size_t k = 0; k < d; ++k) r.mean[k] += p[k] / n;
  }
  std::vector<Vec> cov(d, Vec(d, 0.0));
  for (const auto& p : points) {
    for (std::size_t i = 0; i < d; ++i) {
      const double a = p[i] - r.mean[i];
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += a * (p[j] - r.mean[j]) / n;
    }
  }

  for (std::size_t c = 0; c < n_comp; ++c) {
    // Start off-axis so that no eigenvector is orthogonal to the seed.
    Vec v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = 1.0 + 0.1 * static_cast<double>(k);
    for (double& x : v) x /= norm(v);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
      Vec w = mat_vec(cov, v);
      const double wn = norm(w);
      if (wn < 1e-300) {
        v = orthogonal_to(r.components, d);
        break;
      }
      for (double& x : w) x /= wn;
      double diff = 0.0;
      for (std::size_t k = 0; k < d; ++k) diff = std::max(diff, std::abs(w[k] - v[k]));
      v = std::move(w);
      if (diff < opts.tolerance) break;
    }
    fix_sign(v);
    const Vec cv = mat_vec(cov, v);
    double lambda = 0.0;
    for (std::size_t k = 0; k < d; ++k) lambda += v[k] * cv[k];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i][j] -= lambda * v[i] * v[j];
    }
    r.components.push_back(std::move(v));
    r.variances.push_back(lambda);
  }

  r.projected.reserve(points.size());
  for (const auto& p : points) {
    Vec row(r.components.size(), 0.0);
    for (std::size_t c = 0; c < r.components.size(); ++c) {
      for (std::size_t k = 0; k < d; ++k) row[c] += (p[k] - r.mean[k]) * r.components[c][k];
    }
    r.projected.push_back(std::move(row));
  }
  return r;
}

std::vector<ProjectionRow> export_projection(const ParamStore& store, const Dataset& ds,
                                             Concept target, std::size_t n_random,
                                             std::uint64_t seed) {
  const auto linked = ds.concepts.items_of(target);
  if (linked.empty()) {
    throw DataError("concept (relation " + std::to_string(target.relation) + ", tag " +
                    std::to_string(target.tag) + ") has no items");
  }
  std::vector<Id> others;
  for (Id i = 0; i < ds.n_items(); ++i) {
    if (!std::binary_search(linked.begin(), linked.end(), i)) others.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(others.begin(), others.end());
  others.resize(std::min(n_random, others.size()));
  std::sort(others.begin(), others.end());

  std::vector<ProjectionRow> rows;
  std::vector<Vec> pts;
  for (Id i : linked) rows.push_back({i, 0.0, 0.0, true});
  for (Id i : others) rows.push_back({i, 0.0, 0.0, false});
  for (const auto& row : rows) {
    const auto p = store.item(row.item);
    pts.emplace_back(p.begin(), p.end());
  }
  const auto pca = pca_power(pts);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    rows[j].x = pca.projected[j][0];
    rows[j].y = pca.projected[j].size() > 1 ? pca.projected[j][1] : 0.0;
  }
  return rows;
}

void write_projection_csv(const std::vector<ProjectionRow>& rows, std::ostream& out) {
  out << "item_id,x,y,label\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%u,%.9g,%.9g,%s\n", r.item, r.x, r.y,
                  r.linked ? "concept" : "random");
    out << buf;
  }
}

}  // namespace inbox
