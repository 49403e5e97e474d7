#pragma once

#include <cstdint>
#include <vector>

#include "vsop3d/tensor/tensor.hpp"

namespace vsop3d {

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update of every parameter from its grad buffer.
// Parameters without a gradient buffer are treated as having zero gradient.
void adam_step(std::vector<Tensor>& params, double learning_rate, AdamState& state,
               const AdamConfig& config = {});

double global_grad_norm(const std::vector<Tensor>& params);
// Scales all gradients by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm measured before scaling.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

void zero_grads(std::vector<Tensor>& params);

}  // namespace vsop3d
