#include "mflow/interval/interval_spline.hpp"

#include <algorithm>

namespace mflow {

std::vector<double> IntervalSpec::identity_params() const {
  std::vector<double> p(param_count(), 0.0);
  const double slope = softplus_inverse(1.0 - kMinSlope);
  for (int i = 0; i <= K; ++i) p[2 * K + i] = slope;
  return p;
}

double check_interval(const IntervalSpec& spec, double t) {
  if (!(t >= spec.a - 1e-12 && t <= spec.b + 1e-12)) {
    throw DomainError("interval coordinate " + std::to_string(t) + " outside [" + std::to_string(spec.a) + ", " +
                      std::to_string(spec.b) + "]");
  }
  return std::clamp(t, spec.a, spec.b);
}

}  // namespace mflow
