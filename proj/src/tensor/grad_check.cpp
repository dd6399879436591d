#include "hpnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hpnet/errors.hpp"

namespace hpnet {

GradCheckResult grad_check_detailed(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                                    double eps, double floor) {
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tensor loss = f(x);
    if (loss.numel() != 1) throw ContractError("grad_check: f must return a scalar");
    backward(loss);
  }
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  GradCheckResult result;
  NoGradGuard no_grad;
  auto data = x.mutable_data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + eps;
    const double up = f(x).item();
    data[i] = saved - eps;
    const double down = f(x).item();
    data[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (err > result.max_relative_error || i == 0) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      if (err >= result.max_relative_error) {
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps,
                  double floor) {
  return grad_check_detailed(f, std::move(x), eps, floor).max_relative_error;
}

}  // namespace hpnet
