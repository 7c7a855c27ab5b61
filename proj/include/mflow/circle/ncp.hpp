#pragma once

// Non-compact projection: the affine map x -> a x + b on the real line,
// conjugated by the half-angle projection of the circle.

#include <span>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

inline constexpr double kNcpMinScale = 1e-3;

template <Scalar S>
struct NcpMix {
  std::vector<S> alpha, beta;
  std::vector<S> log_rho;
};

/// Raw layout: K scale parameters, K offsets, K mixture logits.
template <Scalar S>
NcpMix<S> make_ncp(std::span<const S> raw, int K) {
  NcpMix<S> m;
  const auto k = static_cast<std::size_t>(K);
  for (std::size_t i = 0; i < k; ++i) {
    m.alpha.push_back(softplus(raw[i]) + kNcpMinScale);
    m.beta.push_back(raw[k + i]);
  }
  m.log_rho = log_softmax<S>(raw.subspan(2 * k, k));
  return m;
}

/// Single component. Written with atan2 of the half-angle so that it is exact
/// at both ends of [0, 2pi] without a separate linearised branch.
template <Scalar S>
Eval<S> ncp_single(const S& alpha, const S& beta, const S& theta) {
  const S half = 0.5 * theta;
  const S sh = sm::sin(half);
  const S ch = sm::cos(half);
  const S value = 2.0 * sm::atan2(sh, alpha * ch - beta * sh);
  const S denom = (1.0 + beta * beta) / alpha * sh * sh + alpha * ch * ch - 2.0 * beta * sh * ch;
  return {value, -sm::log(denom)};
}

template <Scalar S>
Eval<S> ncp_core(const NcpMix<S>& m, const S& theta) {
  const std::size_t k = m.alpha.size();
  if (k == 1) return ncp_single(m.alpha[0], m.beta[0], theta);
  S value = 0.0;
  std::vector<S> terms(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Eval<S> e = ncp_single(m.alpha[i], m.beta[i], theta);
    value += sm::exp(m.log_rho[i]) * e.value;
    terms[i] = m.log_rho[i] + e.log_det;
  }
  return {value, log_sum_exp<S>(terms)};
}

}  // namespace mflow
