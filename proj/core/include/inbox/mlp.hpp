#pragma once

// Fully connected network over flat parameter spans, with reverse mode.
// Layout per layer: weight (out x in, row-major) followed by bias (out).
// Hidden layers use the configured activation; the output layer is affine.

#include <cstddef>
#include <string>
#include <vector>

#include "inbox/geometry.hpp"
#include "inbox/rng.hpp"

namespace inbox {

enum class Activation { Relu, Tanh };
const char* to_string(Activation a);
Activation parse_activation(const std::string& name);

struct MlpShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::Relu;

  std::size_t n_layers() const { return hidden.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? in : hidden[l - 1]; }
  std::size_t layer_out(std::size_t l) const { return l == hidden.size() ? out : hidden[l]; }
  std::size_t param_count() const;
};

// Per-call activations kept for the backward pass.
struct MlpCache {
  std::vector<Vec> inputs;  // inputs[l] feeds layer l
  std::vector<Vec> pre;     // pre-activation of hidden layer l
};

void mlp_forward(const MlpShape& shape, ConstSpan weights, ConstSpan x, MlpCache& cache,
                 MutSpan y);

// Accumulates into dweights and dx (dx may be empty).
void mlp_backward(const MlpShape& shape, ConstSpan weights, const MlpCache& cache, ConstSpan dy,
                  MutSpan dweights, MutSpan dx);

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
void mlp_init(const MlpShape& shape, MutSpan weights, Rng& rng);

}  // namespace inbox
