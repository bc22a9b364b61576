#include "memqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace memqa {

GradCheckReport FiniteDiffCheck(const ObjectiveFn& f, const ParamStore& params,
                                const GradCheckOptions& options) {
  ParamStore analytic = params.ZerosLike();
  f(params, &analytic);

  GradCheckReport report;
  RngStream rng(options.seed);
  ParamStore probe = params;
  for (const auto& name : params.names()) {
    Tensor& t = probe.Get(name);
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.coords_per_tensor) {
      rng.Shuffle(std::span<std::size_t>(coords));
      coords.resize(options.coords_per_tensor);
    }
    for (std::size_t idx : coords) {
      const double orig = t[idx];
      t[idx] = orig + options.h;
      const double plus = f(probe, nullptr);
      t[idx] = orig - options.h;
      const double minus = f(probe, nullptr);
      t[idx] = orig;
      const double numeric = (plus - minus) / (2.0 * options.h);
      const double a = analytic.Get(name)[idx];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++report.coords_checked;
      if (rel > report.max_rel_error || report.worst_param.empty()) {
        if (rel >= report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = name;
          report.worst_index = idx;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace memqa
