#pragma once

// Monotone rational-quadratic spline on [a, b] with knots (x_k, y_k) and knot
// derivatives d_k. Shared by the interval flow and the circular spline.

#include <algorithm>
#include <span>
#include <vector>

#include "mflow/errors.hpp"
#include "mflow/scalar.hpp"

namespace mflow {

inline constexpr double kMinBinFraction = 1e-3;
inline constexpr double kMinSlope = 1e-3;

/// Spline value with the endpoint log ratios log((t-a)/(g-a)) and
/// log((b-t)/(b-g)), both finite at the endpoints.
template <Scalar S>
struct IntervalEval {
  S value;
  S log_det;
  S log_ratio_lo;
  S log_ratio_hi;
};

template <Scalar S>
struct RqSpline {
  double a = 0.0;
  double b = 1.0;
  std::vector<S> w, h;   // bin widths and heights (K)
  std::vector<S> x, y;   // knots (K+1); x[0]=y[0]=a, x[K]=y[K]=b held constant
  std::vector<S> d;      // knot derivatives (K+1)

  int bins() const { return static_cast<int>(w.size()); }

  using Full = IntervalEval<S>;

  int bin_of_x(double t) const;
  int bin_of_y(double v) const;
  Eval<S> forward(const S& t) const;
  Full forward_full(const S& t) const;
  double inverse(double v) const;
  /// Inverse carrying derivatives through one implicit-function step.
  S inverse_diff(const S& v) const;
};

/// Widths or heights: (b - a) * (min + (1 - K min) * softmax(logits)).
template <Scalar S>
std::vector<S> rq_bin_sizes(std::span<const S> logits, double span_len) {
  const auto k = static_cast<double>(logits.size());
  std::vector<S> p = softmax<S>(logits);
  for (auto& v : p) v = span_len * (kMinBinFraction + (1.0 - kMinBinFraction * k) * v);
  return p;
}

template <Scalar S>
S rq_slope(const S& raw) {
  return softplus(raw) + kMinSlope;
}

/// Assembles a spline from constrained bin sizes and derivatives.
template <Scalar S>
RqSpline<S> make_rq_spline(double a, double b, std::vector<S> widths, std::vector<S> heights,
                           std::vector<S> derivs) {
  RqSpline<S> s;
  s.a = a;
  s.b = b;
  const std::size_t k = widths.size();
  if (k == 0 || heights.size() != k || derivs.size() != k + 1) {
    throw DiffError(DiffError::Kind::Shape, "spline: need K widths, K heights and K+1 derivatives");
  }
  s.x.resize(k + 1);
  s.y.resize(k + 1);
  s.x[0] = a;
  s.y[0] = a;
  for (std::size_t i = 1; i < k; ++i) {
    s.x[i] = s.x[i - 1] + widths[i - 1];
    s.y[i] = s.y[i - 1] + heights[i - 1];
  }
  s.x[k] = b;
  s.y[k] = b;
  s.w = std::move(widths);
  s.h = std::move(heights);
  s.d = std::move(derivs);
  return s;
}

template <Scalar S>
int RqSpline<S>::bin_of_x(double t) const {
  const int k = bins();
  int lo = 0;
  int hi = k;  // search x[1..K-1]
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (value_of(x[mid]) <= t) lo = mid; else hi = mid;
  }
  return lo;
}

template <Scalar S>
int RqSpline<S>::bin_of_y(double v) const {
  const int k = bins();
  int lo = 0;
  int hi = k;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (value_of(y[mid]) <= v) lo = mid; else hi = mid;
  }
  return lo;
}

template <Scalar S>
typename RqSpline<S>::Full RqSpline<S>::forward_full(const S& t) const {
  const int k = bin_of_x(value_of(t));
  const int last = bins() - 1;
  const S& wk = w[k];
  const S& hk = h[k];
  const S& d0 = d[k];
  const S& d1 = d[k + 1];
  const S s = hk / wk;
  S xi, om;
  if (k == last) {
    om = (b - t) / wk;
    xi = 1.0 - om;
  } else {
    xi = (t - x[k]) / wk;
    om = 1.0 - xi;
  }
  const S xo = xi * om;
  const S den = s + (d1 + d0 - 2.0 * s) * xo;
  // offset from the left knot and from the right knot, both without cancellation
  const S left = hk * xi * (s * xi + d0 * om) / den;
  const S right = hk * om * (s * om + d1 * xi) / den;
  Full f;
  f.value = k == last ? b - right : y[k] + left;
  const S num = d1 * xi * xi + 2.0 * s * xo + d0 * om * om;
  f.log_det = 2.0 * sm::log(s) + sm::log(num) - 2.0 * sm::log(den);
  if (k == 0) {
    f.log_ratio_lo = sm::log(wk * den) - sm::log(hk * (s * xi + d0 * om));
  } else {
    f.log_ratio_lo = sm::log(t - a) - sm::log(f.value - a);
  }
  if (k == last) {
    f.log_ratio_hi = sm::log(wk * den) - sm::log(hk * (s * om + d1 * xi));
  } else {
    f.log_ratio_hi = sm::log(b - t) - sm::log(b - f.value);
  }
  return f;
}

template <Scalar S>
Eval<S> RqSpline<S>::forward(const S& t) const {
  const int k = bin_of_x(value_of(t));
  const int last = bins() - 1;
  const S& wk = w[k];
  const S& hk = h[k];
  const S& d0 = d[k];
  const S& d1 = d[k + 1];
  const S s = hk / wk;
  S xi, om;
  if (k == last) {
    om = (b - t) / wk;
    xi = 1.0 - om;
  } else {
    xi = (t - x[k]) / wk;
    om = 1.0 - xi;
  }
  const S xo = xi * om;
  const S den = s + (d1 + d0 - 2.0 * s) * xo;
  Eval<S> e;
  if (k == last) {
    e.value = b - hk * om * (s * om + d1 * xi) / den;
  } else {
    e.value = y[k] + hk * xi * (s * xi + d0 * om) / den;
  }
  const S num = d1 * xi * xi + 2.0 * s * xo + d0 * om * om;
  e.log_det = 2.0 * sm::log(s) + sm::log(num) - 2.0 * sm::log(den);
  return e;
}

template <Scalar S>
double RqSpline<S>::inverse(double v) const {
  if (v <= a) return a;
  if (v >= b) return b;
  const int k = bin_of_y(v);
  const double wk = value_of(w[k]);
  const double hk = value_of(h[k]);
  const double d0 = value_of(d[k]);
  const double d1 = value_of(d[k + 1]);
  const double yk = value_of(y[k]);
  const double s = hk / wk;
  const double dy = v - yk;
  const double c2 = hk * (s - d0) + dy * (d1 + d0 - 2.0 * s);
  const double c1 = hk * d0 - dy * (d1 + d0 - 2.0 * s);
  const double c0 = -s * dy;
  const double disc = std::max(c1 * c1 - 4.0 * c2 * c0, 0.0);
  const double xi = std::clamp(2.0 * c0 / (-c1 - std::sqrt(disc)), 0.0, 1.0);
  if (k == bins() - 1 && xi > 0.5) return b - wk * (1.0 - xi);
  return value_of(x[k]) + xi * wk;
}

template <Scalar S>
S RqSpline<S>::inverse_diff(const S& v) const {
  const double t0 = inverse(value_of(v));
  if constexpr (std::same_as<S, double>) {
    return t0;
  } else {
    const Eval<S> at = forward(S(t0));
    return t0 - (at.value - v) / std::exp(value_of(at.log_det));
  }
}

}  // namespace mflow
