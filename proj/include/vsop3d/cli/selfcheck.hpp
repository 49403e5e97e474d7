#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsop3d/tensor/ops.hpp"

namespace vsop3d {

using Conv2dFn = std::function<Tensor(const Tensor&, const Tensor&, const ConvSpec&)>;

struct SelfcheckOptions {
  // Implementation under test; swapped out by mutation fixtures.
  Conv2dFn conv2d = ops::conv2d;
};

struct CheckResult {
  std::string op;
  bool passed = false;
  std::string detail;  // inputs plus observed vs expected on failure
};

struct SelfcheckReport {
  bool passed = true;
  std::vector<CheckResult> checks;

  nlohmann::ordered_json to_json() const;
  std::vector<std::string> failed_ops() const;
};

// Fast oracle suites: convolution against naive loops, finite-difference
// gradient checks, GAE against an independent recursion, and the aggregate
// statistics against brute-force definitions. Deterministic.
SelfcheckReport run_selfcheck(const SelfcheckOptions& options = {});

// conv2d with the kernel's width index reversed; a known-bad implementation
// for exercising the self-check.
Tensor mutated_conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec);

}  // namespace vsop3d
