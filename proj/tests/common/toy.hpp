#pragma once

// Small hand-written dataset used across the unit and acceptance tests.
//
// Items 0..5, tags 0..3 (entities 6..9), four raw relations. Item 4 carries
// three concepts, item 5 none (it falls back to a point box).

#include <cstdint>

#include "inbox/kg_data.hpp"
#include "inbox/model.hpp"
#include "inbox/training.hpp"

namespace inbox::testing {

Dataset toy_dataset();

// Random store for the toy dataset with a small margin so the loss is not
// saturated at d = 4.
ParamStore toy_store(const Dataset& ds, std::size_t dim, std::uint64_t seed,
                     double margin = 3.0);

TrainConfig toy_config(std::size_t dim);

// One hand-built batch per stage-1 triplet class.
Batch toy_pretrain_batch(TripletType type);
Batch toy_intersection_batch();
// Two users; one positive sits in its own history (leave-one-out), one does
// not, and the history includes the concept-less item.
Batch toy_recommendation_batch();

}  // namespace inbox::testing
