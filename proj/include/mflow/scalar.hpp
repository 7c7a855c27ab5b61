#pragma once

// Scalar-generic math. Flow code is written once as templates over `double`
// (plain evaluation) and `diff::Var` (recorded on the tape for gradients).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <span>
#include <vector>

#include "mflow/diff/tape.hpp"

namespace mflow {

using diff::Var;

template <class S>
concept Scalar = std::same_as<S, double> || std::same_as<S, Var>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.val; }

namespace sm {
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double atan(double x) { return std::atan(x); }
inline double atan2(double y, double x) { return std::atan2(y, x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double log1p(double x) { return std::log1p(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double abs(double x) { return std::abs(x); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double max(double a, double b) { return a >= b ? a : b; }
inline double min(double a, double b) { return a <= b ? a : b; }

inline Var sin(const Var& x) { return diff::sin(x); }
inline Var cos(const Var& x) { return diff::cos(x); }
inline Var tan(const Var& x) { return diff::tan(x); }
inline Var atan(const Var& x) { return diff::atan(x); }
inline Var atan2(const Var& y, const Var& x) { return diff::atan2(y, x); }
inline Var exp(const Var& x) { return diff::exp(x); }
inline Var log(const Var& x) { return diff::log(x); }
inline Var log1p(const Var& x) { return diff::log1p(x); }
inline Var sqrt(const Var& x) { return diff::sqrt(x); }
inline Var tanh(const Var& x) { return diff::tanh(x); }
inline Var abs(const Var& x) { return diff::abs(x); }
inline Var relu(const Var& x) { return diff::relu(x); }
inline Var max(const Var& a, const Var& b) { return diff::max(a, b); }
inline Var min(const Var& a, const Var& b) { return diff::min(a, b); }
}  // namespace sm

/// log(1 + e^x) without overflow.
template <Scalar S>
S softplus(const S& x) {
  if (value_of(x) > 0.0) return x + sm::log1p(sm::exp(-x));
  return sm::log1p(sm::exp(x));
}

template <Scalar S>
S sigmoid(const S& x) {
  if (value_of(x) >= 0.0) return 1.0 / (1.0 + sm::exp(-x));
  const S e = sm::exp(x);
  return e / (1.0 + e);
}

template <Scalar S>
S log_sum_exp(std::span<const S> xs) {
  double m = -INFINITY;
  for (const S& x : xs) m = std::max(m, value_of(x));
  S acc = 0.0;
  for (const S& x : xs) acc += sm::exp(x - m);
  return sm::log(acc) + m;
}

/// Writes softmax(xs) into out (same length).
template <Scalar S>
void softmax(std::span<const S> xs, std::span<S> out) {
  double m = -INFINITY;
  for (const S& x : xs) m = std::max(m, value_of(x));
  S total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = sm::exp(xs[i] - m);
    total += out[i];
  }
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = out[i] / total;
}

template <Scalar S>
std::vector<S> softmax(std::span<const S> xs) {
  std::vector<S> out(xs.size());
  softmax<S>(xs, out);
  return out;
}

/// log softmax, numerically stable.
template <Scalar S>
std::vector<S> log_softmax(std::span<const S> xs) {
  const S lse = log_sum_exp<S>(xs);
  std::vector<S> out;
  out.reserve(xs.size());
  for (const S& x : xs) out.push_back(x - lse);
  return out;
}

/// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) { return y > 20.0 ? y : std::log(std::expm1(y)); }

/// Wraps an angle into [0, 2pi) by a constant shift (gradient passes through).
template <Scalar S>
S wrap_angle(const S& theta) {
  const double shift = kTwoPi * std::floor(value_of(theta) / kTwoPi);
  S out = theta - shift;
  if (value_of(out) >= kTwoPi) out = out - kTwoPi;
  if (value_of(out) < 0.0) out = out + kTwoPi;
  return out;
}

/// Shortest distance between two angles on the circle.
inline double circular_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

template <Scalar S>
std::vector<S> to_scalars(std::span<const double> xs) {
  return std::vector<S>(xs.begin(), xs.end());
}

/// A mapped value and the log of the map's derivative (or |det J|) there.
template <Scalar S>
struct Eval {
  S value;
  S log_det;
};

}  // namespace mflow
