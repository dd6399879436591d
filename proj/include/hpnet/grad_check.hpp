#pragma once

#include <functional>

#include "hpnet/tensor.hpp"

namespace hpnet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

/// Compares the reverse-mode gradient of scalar f at leaf x against central
/// differences. Relative error per element is |a - n| / max(|a|, |n|, floor).
/// The default floor sits above the roundoff of a central difference at
/// eps = 1e-5 for O(1) losses (about 1e-11 absolute), so elements whose
/// gradient is below what the difference can resolve do not count as errors.
/// x is perturbed in place and restored; its grad is cleared first.
GradCheckResult grad_check_detailed(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                                    double eps = 1e-5, double floor = 1e-6);

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5,
                  double floor = 1e-6);

}  // namespace hpnet
