#pragma once

#include <span>
#include <string>
#include <vector>

#include "mflow/interval/rq_spline.hpp"

namespace mflow {

/// Raw layout: K width logits, K height logits, K+1 slope parameters.
struct IntervalSpec {
  int K = 8;
  double a = -1.0;
  double b = 1.0;

  std::size_t param_count() const { return 3 * static_cast<std::size_t>(K) + 1; }
  std::vector<double> identity_params() const;
};

template <Scalar S>
RqSpline<S> make_interval_spline(const IntervalSpec& spec, std::span<const S> raw) {
  const auto k = static_cast<std::size_t>(spec.K);
  if (raw.size() != spec.param_count()) {
    throw DiffError(DiffError::Kind::Shape, "interval spline: expected " + std::to_string(spec.param_count()) +
                                                " parameters, got " + std::to_string(raw.size()));
  }
  const double len = spec.b - spec.a;
  std::vector<S> widths = rq_bin_sizes<S>(raw.subspan(0, k), len);
  std::vector<S> heights = rq_bin_sizes<S>(raw.subspan(k, k), len);
  std::vector<S> derivs;
  derivs.reserve(k + 1);
  for (std::size_t i = 0; i <= k; ++i) derivs.push_back(rq_slope(raw[2 * k + i]));
  return make_rq_spline<S>(spec.a, spec.b, std::move(widths), std::move(heights), std::move(derivs));
}

/// Throws DomainError when t lies outside [a, b] by more than 1e-12; otherwise clamps.
double check_interval(const IntervalSpec& spec, double t);

}  // namespace mflow
