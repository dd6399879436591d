#include <cmath>

#include "hpnet/errors.hpp"
#include "hpnet/training.hpp"

namespace hpnet {

OptimizerState make_optimizer(const std::vector<NamedTensor>& params, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(const std::vector<NamedTensor>& params, OptimizerState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match the parameter list");
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
  }
  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != t.numel()) {
      throw ContractError("adam_step: moment size mismatch for " + params[i].name);
    }
    auto w = t.mutable_data();
    auto g = t.grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      w[k] -= c.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + c.eps);
    }
    t.zero_grad();
  }
}

double clip_grad_norm(const std::vector<NamedTensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.tensor.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (const auto& p : params) {
      Tensor t = p.tensor;
      for (double& g : t.mutable_grad()) g *= k;
    }
  }
  return norm;
}

}  // namespace hpnet
