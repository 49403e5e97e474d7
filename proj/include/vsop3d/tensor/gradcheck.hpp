#pragma once

#include <functional>
#include <vector>

#include "vsop3d/tensor/rng.hpp"
#include "vsop3d/tensor/tensor.hpp"

namespace vsop3d {

struct GradCheckResult {
  // Largest norm-wise relative error ||analytic - numeric|| / max(norms)
  // over the inputs.
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
};

// Compares reverse-mode gradients of sum(f(inputs) * w), for fixed random
// weights w, against central differences with the given step. f must be a
// pure function of its inputs. Inputs are leaf tensors and are not modified.
GradCheckResult gradient_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                               const std::vector<Tensor>& inputs, Rng& rng, double step = 1e-5);

}  // namespace vsop3d
