#include "vsop3d/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vsop3d/tensor/ops.hpp"

namespace vsop3d {

GradCheckResult gradient_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                               const std::vector<Tensor>& inputs, Rng& rng, double step) {
  std::vector<Tensor> leaves;
  for (const auto& x : inputs) leaves.push_back(x.clone(true));

  const Tensor probe = f(leaves);
  std::vector<double> w(static_cast<std::size_t>(probe.numel()));
  for (double& v : w) v = rng.normal();
  const Tensor weights = Tensor::from(probe.shape(), w);
  auto objective = [&](const std::vector<Tensor>& xs) { return ops::sum(ops::mul(f(xs), weights)); };

  backward(objective(leaves));

  GradCheckResult result;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    std::vector<double> analytic(static_cast<std::size_t>(leaves[k].numel()), 0.0);
    if (leaves[k].has_grad()) std::copy(leaves[k].grad().begin(), leaves[k].grad().end(), analytic.begin());
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    NoGradGuard no_grad;
    auto data = leaves[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = objective(leaves).item();
      data[i] = saved - step;
      const double down = objective(leaves).item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_input = k;
    }
  }
  return result;
}

}  // namespace vsop3d
