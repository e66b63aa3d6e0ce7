#include "fd_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "inbox/rng.hpp"
#include "toy.hpp"

namespace inbox::testing {
namespace {

struct Coord {
  std::size_t array;
  std::size_t index;
};

std::vector<MutSpan> spans_of(ParamTables& p) {
  std::vector<MutSpan> out;
  p.for_each([&](const char*, MutSpan s) { out.push_back(s); });
  return out;
}

const char* array_name(std::size_t a) {
  static const char* names[] = {"items", "tags", "relations", "users", "attn_net", "user_net"};
  return names[a];
}

}  // namespace

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> out;
  for (bool literal : {false, true}) {
    const std::string form = literal ? "literal" : "bounded";
    TrainConfig cfg = toy_config(4);
    cfg.literal_loss = literal;
    for (TripletType t : {TripletType::IRI, TripletType::TRT, TripletType::IRT}) {
      out.push_back({std::string("pretrain/") + to_string(t) + "/" + form,
                     toy_pretrain_batch(t), cfg});
    }
    for (auto v : {IntersectionVariant::Attention, IntersectionVariant::MaxMin}) {
      TrainConfig c = cfg;
      c.interest.variant = v;
      out.push_back({std::string("intersection/") + to_string(v) + "/" + form,
                     toy_intersection_batch(), c});
      for (auto m : {CombineMode::Both, CombineMode::ItemOnly, CombineMode::UserOnly}) {
        if (v == IntersectionVariant::MaxMin && m == CombineMode::UserOnly) continue;
        c.interest.combine = m;
        out.push_back({std::string("recommendation/") + to_string(v) + "/" + to_string(m) + "/" +
                           form,
                       toy_recommendation_batch(), c});
      }
    }
  }
  return out;
}

FdReport finite_difference_check(const Batch& batch, const ParamStore& store,
                                 const ConceptIndex& concepts, const TrainConfig& cfg,
                                 const FdOptions& opts) {
  StepResult analytic = grad_step(batch, store, concepts, cfg);
  ParamStore work = store;
  auto grads = spans_of(analytic.tape);
  auto params = spans_of(work.params);

  // Candidates are coordinates on the loss path; the rest are zero on both
  // sides and would pass trivially.
  std::vector<Coord> candidates;
  for (std::size_t a = 0; a < grads.size(); ++a) {
    for (std::size_t i = 0; i < grads[a].size(); ++i) {
      if (grads[a][i] != 0.0) candidates.push_back({a, i});
    }
  }
  Rng rng(opts.seed);
  rng.shuffle(candidates.begin(), candidates.end());

  const double f0 = batch_loss(batch, work, concepts, cfg);
  FdReport rep;
  rep.candidates = candidates.size();
  for (const Coord& c : candidates) {
    if (rep.checked == opts.n_params) break;
    double& x = params[c.array][c.index];
    const double x0 = x;
    x = x0 + opts.h;
    const double fp = batch_loss(batch, work, concepts, cfg);
    x = x0 - opts.h;
    const double fm = batch_loss(batch, work, concepts, cfg);
    x = x0;

    const double fwd = (fp - f0) / opts.h;
    const double bwd = (f0 - fm) / opts.h;
    const double central = (fp - fm) / (2.0 * opts.h);
    if (std::abs(fwd - bwd) > 1e-3 * std::abs(central) + 1e-7) {
      ++rep.skipped;
      continue;
    }
    const double a = grads[c.array][c.index];
    const double rel = std::abs(a - central) / (std::abs(a) + 1e-6);
    ++rep.checked;
    if (rel >= opts.tolerance) ++rep.failures;
    if (rel >= rep.max_rel_err) {
      rep.max_rel_err = rel;
      std::ostringstream os;
      os << array_name(c.array) << "[" << c.index << "] analytic " << a << " numeric "
         << central;
      rep.worst = os.str();
    }
  }
  return rep;
}

}  // namespace inbox::testing
