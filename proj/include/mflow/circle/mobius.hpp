#pragma once

// Moebius circle maps: the chord projection through an interior point w,
// rotated so that 0 stays fixed, mixed by convex weights.

#include <span>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

inline constexpr double kMobiusRadius = 0.99;

template <Scalar S>
struct MobiusMix {
  std::vector<S> wx, wy;  // constrained centres, |w| < 0.99
  std::vector<S> log_rho;
};

/// Raw layout: K centre pairs (x, y), then K mixture logits.
template <Scalar S>
MobiusMix<S> make_mobius(std::span<const S> raw, int K) {
  MobiusMix<S> m;
  m.wx.reserve(K);
  m.wy.reserve(K);
  for (int i = 0; i < K; ++i) {
    const S& px = raw[2 * i];
    const S& py = raw[2 * i + 1];
    const S norm = sm::sqrt(px * px + py * py + 1e-30);
    const S scale = kMobiusRadius / (1.0 + norm);
    m.wx.push_back(scale * px);
    m.wy.push_back(scale * py);
  }
  m.log_rho = log_softmax<S>(raw.subspan(2 * static_cast<std::size_t>(K), K));
  return m;
}

/// Angle of h_w(z) measured from h_w(1), lifted to [0, 2pi] continuously in theta.
template <Scalar S>
S mobius_angle(const S& wx, const S& wy, const S& c, const S& s, double theta) {
  const S w2 = wx * wx + wy * wy;
  const S gain = 1.0 - w2;
  const S dx = c - wx;
  const S dy = s - wy;
  const S k = gain / (dx * dx + dy * dy);
  const S hx = k * dx - wx;
  const S hy = k * dy - wy;
  const S ex = 1.0 - wx;
  const S k1 = gain / (ex * ex + wy * wy);
  const S gx = k1 * ex - wx;
  const S gy = -k1 * wy - wy;
  S r = sm::atan2(hy * gx - hx * gy, hx * gx + hy * gy);
  // monotone with slope >= 0.005, so values near the seam are unambiguous
  if (value_of(r) < 0.0) r = r + kTwoPi;
  if (theta >= kPi && value_of(r) < 1e-3) r = r + kTwoPi;
  if (theta < kPi && value_of(r) > kTwoPi - 1e-3) r = r - kTwoPi;
  return r;
}

template <Scalar S>
Eval<S> mobius_core(const MobiusMix<S>& m, const S& theta) {
  const S c = sm::cos(theta);
  const S s = sm::sin(theta);
  const double t = value_of(theta);
  const std::size_t k = m.wx.size();
  if (k == 1) {
    const S dx = c - m.wx[0];
    const S dy = s - m.wy[0];
    const S deriv = (1.0 - m.wx[0] * m.wx[0] - m.wy[0] * m.wy[0]) / (dx * dx + dy * dy);
    return {mobius_angle(m.wx[0], m.wy[0], c, s, t), sm::log(deriv)};
  }
  S value = 0.0;
  std::vector<S> terms(k);
  for (std::size_t i = 0; i < k; ++i) {
    const S rho = sm::exp(m.log_rho[i]);
    value += rho * mobius_angle(m.wx[i], m.wy[i], c, s, t);
    const S dx = c - m.wx[i];
    const S dy = s - m.wy[i];
    const S gain = 1.0 - m.wx[i] * m.wx[i] - m.wy[i] * m.wy[i];
    terms[i] = m.log_rho[i] + sm::log(gain) - sm::log(dx * dx + dy * dy);
  }
  return {value, log_sum_exp<S>(terms)};
}

}  // namespace mflow
