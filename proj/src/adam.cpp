#include "memqa/adam.hpp"

#include <cmath>

#include "memqa/error.hpp"

namespace memqa {

AdamState AdamState::For(const ParamStore& params, AdamConfig config) {
  if (!(config.lr > 0.0)) throw UsageError("adam: learning rate must be positive");
  return AdamState{config, params.ZerosLike(), params.ZerosLike(), 0};
}

void AdamStep(ParamStore& params, const ParamStore& grads, AdamState& state, double weight_decay) {
  for (const auto& name : params.names()) {
    const Tensor& g = grads.Get(name);
    if (g.shape() != params.Get(name).shape()) {
      throw ShapeError("adam: gradient for '" + name + "' has shape " + ShapeString(g.shape()));
    }
    if (!g.AllFinite()) throw NumericError("adam: non-finite gradient for parameter '" + name + "'");
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& name : params.names()) {
    Tensor& theta = params.Get(name);
    const Tensor& g = grads.Get(name);
    Tensor& m = state.m.Get(name);
    Tensor& v = state.v.Get(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + weight_decay * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double ClipGlobalNorm(ParamStore& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& name : grads.names()) {
    for (double v : grads.Get(name).data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& name : grads.names()) {
      for (double& v : grads.Get(name).data()) v *= s;
    }
  }
  return norm;
}

}  // namespace memqa
