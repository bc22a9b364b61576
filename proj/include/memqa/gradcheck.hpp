#pragma once

#include <functional>
#include <string>

#include "memqa/rng.hpp"
#include "memqa/tensor.hpp"

namespace memqa {

// Evaluates a scalar objective at `params`. When `grad` is non-null it must
// also be filled with the analytic gradient.
using ObjectiveFn = std::function<double(const ParamStore& params, ParamStore* grad)>;

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates sampled per tensor; tensors at or below this size are
  // checked exhaustively.
  std::size_t coords_per_tensor = 12;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Central differences on a sampled subset of coordinates. The relative error
// of one coordinate is |a - n| / max(1e-8, |a| + |n|); the report carries the
// maximum.
GradCheckReport FiniteDiffCheck(const ObjectiveFn& f, const ParamStore& params,
                                const GradCheckOptions& options = {});

}  // namespace memqa
