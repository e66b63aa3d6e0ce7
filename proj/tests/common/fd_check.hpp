#pragma once

// Central finite differences against grad_step.
//
// A coordinate counts as kink-free when the forward and backward one-sided
// differences agree; a kink inside [x - h, x + h] makes them disagree, so
// such coordinates are skipped and another one is drawn.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "inbox/training.hpp"

namespace inbox::testing {

struct FdReport {
  std::size_t candidates = 0;  // coordinates with a non-zero analytic gradient
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;
  std::string worst;  // "<array>[<index>] analytic a numeric n"
};

struct FdOptions {
  std::size_t n_params = 32;
  double h = 1e-4;
  double tolerance = 1e-3;
  std::uint64_t seed = 1;
};

// Every stage loss under both loss forms, both intersection variants and
// all three interest-box combinations, on the toy dataset at d = 4.
struct GradCase {
  std::string name;
  Batch batch;
  TrainConfig cfg;
};
std::vector<GradCase> gradient_cases();

FdReport finite_difference_check(const Batch& batch, const ParamStore& store,
                                 const ConceptIndex& concepts, const TrainConfig& cfg,
                                 const FdOptions& opts = {});

}  // namespace inbox::testing
