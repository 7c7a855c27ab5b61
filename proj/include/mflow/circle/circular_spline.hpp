#pragma once

#include <span>
#include <vector>

#include "mflow/interval/rq_spline.hpp"

namespace mflow {

/// Raw layout: K width logits, K height logits, K slope parameters. The slope at
/// 2pi reuses the one at 0 so the map is smooth across the seam.
template <Scalar S>
RqSpline<S> make_circular_spline(std::span<const S> raw, int K) {
  const auto k = static_cast<std::size_t>(K);
  std::vector<S> widths = rq_bin_sizes<S>(raw.subspan(0, k), kTwoPi);
  std::vector<S> heights = rq_bin_sizes<S>(raw.subspan(k, k), kTwoPi);
  std::vector<S> derivs;
  derivs.reserve(k + 1);
  for (std::size_t i = 0; i < k; ++i) derivs.push_back(rq_slope(raw[2 * k + i]));
  derivs.push_back(derivs.front());
  return make_rq_spline<S>(0.0, kTwoPi, std::move(widths), std::move(heights), std::move(derivs));
}

}  // namespace mflow
