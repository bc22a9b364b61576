#pragma once

#include <cstdint>

#include "memqa/tensor.hpp"

namespace memqa {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  ParamStore m;
  ParamStore v;
  std::int64_t step = 0;

  static AdamState For(const ParamStore& params, AdamConfig config);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One Adam update with bias correction. L2 decay is folded into the gradient
// (g + weight_decay * theta) before the moment update. Throws NumericError
// naming the parameter if any gradient entry is non-finite; parameters are
// left untouched in that case.
void AdamStep(ParamStore& params, const ParamStore& grads, AdamState& state, double weight_decay);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double ClipGlobalNorm(ParamStore& grads, double max_norm);

}  // namespace memqa
