#include "inbox/mlp.hpp"

#include <cmath>

#include "inbox/errors.hpp"

namespace inbox {
namespace {

double activate(Activation a, double x) {
  return a == Activation::Relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activate_grad(Activation a, double pre) {
  if (a == Activation::Relu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

}  // namespace

const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::size_t MlpShape::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < n_layers(); ++l) n += layer_out(l) * (layer_in(l) + 1);
  return n;
}

void mlp_forward(const MlpShape& shape, ConstSpan weights, ConstSpan x, MlpCache& cache,
                 MutSpan y) {
  if (x.size() != shape.in || y.size() != shape.out || weights.size() != shape.param_count()) {
    throw ContractError("mlp_forward: shape mismatch");
  }
  const std::size_t L = shape.n_layers();
  cache.inputs.resize(L);
  cache.pre.resize(L - 1);
  cache.inputs[0].assign(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = shape.layer_in(l);
    const std::size_t out = shape.layer_out(l);
    const double* W = weights.data() + off;
    const double* b = W + out * in;
    const double* a = cache.inputs[l].data();
    double* z = l + 1 < L ? (cache.pre[l].resize(out), cache.pre[l].data()) : y.data();
    // Four rows at a time for instruction-level parallelism. Each row still
    // sums in index order, so results do not depend on the blocking.
    std::size_t o = 0;
    for (; o + 4 <= out; o += 4) {
      const double* r0 = W + o * in;
      const double* r1 = r0 + in;
      const double* r2 = r1 + in;
      const double* r3 = r2 + in;
      double s0 = b[o], s1 = b[o + 1], s2 = b[o + 2], s3 = b[o + 3];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = a[i];
        s0 += r0[i] * ai;
        s1 += r1[i] * ai;
        s2 += r2[i] * ai;
        s3 += r3[i] * ai;
      }
      z[o] = s0;
      z[o + 1] = s1;
      z[o + 2] = s2;
      z[o + 3] = s3;
    }
    for (; o < out; ++o) {
      double s = b[o];
      const double* row = W + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    off += out * (in + 1);
    if (l + 1 < L) {
      Vec& next = cache.inputs[l + 1];
      next.resize(out);
      for (std::size_t k = 0; k < out; ++k) next[k] = activate(shape.activation, z[k]);
    }
  }
}

void mlp_backward(const MlpShape& shape, ConstSpan weights, const MlpCache& cache, ConstSpan dy,
                  MutSpan dweights, MutSpan dx) {
  const std::size_t L = shape.n_layers();
  std::vector<std::size_t> offsets(L);
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offsets[l] = off;
    off += shape.layer_out(l) * (shape.layer_in(l) + 1);
  }
  Vec g(dy.begin(), dy.end());
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = shape.layer_in(l);
    const std::size_t out = shape.layer_out(l);
    const double* W = weights.data() + offsets[l];
    double* dW = dweights.data() + offsets[l];
    double* db = dW + out * in;
    const Vec& a = cache.inputs[l];
    Vec da(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      db[o] += go;
      const double* row = W + o * in;
      double* drow = dW + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        drow[i] += go * a[i];
        da[i] += go * row[i];
      }
    }
    if (l > 0) {
      const Vec& pre = cache.pre[l - 1];
      for (std::size_t i = 0; i < in; ++i) da[i] *= activate_grad(shape.activation, pre[i]);
    } else if (!dx.empty()) {
      for (std::size_t i = 0; i < in; ++i) dx[i] += da[i];
    }
    g = std::move(da);
  }
}

void mlp_init(const MlpShape& shape, MutSpan weights, Rng& rng) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < shape.n_layers(); ++l) {
    const std::size_t in = shape.layer_in(l);
    const std::size_t out = shape.layer_out(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < out * (in + 1); ++k) weights[off + k] = rng.uniform(-bound, bound);
    off += out * (in + 1);
  }
}

}  // namespace inbox
