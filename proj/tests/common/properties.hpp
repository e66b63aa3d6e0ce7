#pragma once

// Randomized property suites shared by the unit tests and the acceptance
// runner. Each returns one result per property so callers can report or
// assert on them individually.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "inbox/geometry.hpp"
#include "inbox/rng.hpp"

namespace inbox::testing {

struct PropertyResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
  std::string first_failure;
};

// Random box with centers in [-2, 2] and raw offsets in [-0.5, 1.5], so
// some dimensions are degenerate.
Box random_box(std::size_t d, Rng& rng);
Point random_point(std::size_t d, Rng& rng, double range = 3.0);

std::vector<PropertyResult> geometry_properties(std::size_t cases, std::uint64_t seed);

// Softmax weights of both learned intersections sum to one per dimension,
// and the attention half-width never exceeds the smallest member's.
std::vector<PropertyResult> intersection_properties(std::size_t cases, std::uint64_t seed);

// Truncations and single-bit flips of a valid checkpoint. Every corrupted
// buffer must raise CorruptCheckpointError and nothing else.
PropertyResult checkpoint_fuzz(std::size_t truncations, std::size_t bit_flips,
                               std::uint64_t seed);
// save -> load -> save is byte-identical and preserves every parameter.
PropertyResult checkpoint_round_trip(std::uint64_t seed);

struct MetricFixture {
  std::vector<std::uint32_t> topk;
  std::vector<std::uint32_t> test;
  double recall;
  double ndcg;
};
// Hand-computed recall/ndcg values.
std::vector<MetricFixture> metric_fixtures();

}  // namespace inbox::testing
