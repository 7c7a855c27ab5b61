#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mflow::diff {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws OptError on a non-finite
/// gradient (parameters are left untouched) or a length mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace mflow::diff
