#pragma once

#include <cmath>
#include <vector>

#include "hpnet/random.hpp"
#include "hpnet/tensor.hpp"

namespace testutil {

inline hpnet::Tensor random_tensor(hpnet::Rng& rng, hpnet::Shape shape, double lo = -1.0,
                                   double hi = 1.0, bool grad = false) {
  std::vector<double> d(hpnet::shape_numel(shape));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return hpnet::Tensor::from_data(std::move(shape), std::move(d), grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Weights 0.3 + 0.7 sin(1.7 i + 0.4): distinct per element, never zero.
inline std::vector<double> probe_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.3 + 0.7 * std::sin(1.7 * double(i) + 0.4);
  return w;
}

}  // namespace testutil
