#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mflow/errors.hpp"

namespace mflow::diff {

inline constexpr std::uint32_t kConstant = 0xFFFFFFFFu;

/// A scalar that may be recorded on the active tape. Constants carry no node.
struct Var {
  double val = 0.0;
  std::uint32_t node = kConstant;

  Var() = default;
  Var(double v) : val(v) {}  // NOLINT(google-explicit-constructor): constants mix freely
  Var(double v, std::uint32_t n) : val(v), node(n) {}

  double value() const { return val; }
  bool is_constant() const { return node == kConstant; }
};

enum class Primitive : std::uint8_t {
  Add, Sub, Mul, Div, Neg, Sin, Cos, Tan, Atan, Atan2, Exp, Log, Log1p,
  Sqrt, Pow, Tanh, Relu, Min, Max, Abs, Dot, Dense, Leaf
};

const char* primitive_name(Primitive p);

/// Arena of recorded scalar operations. Each node stores its parents and the
/// local partial derivatives evaluated during the forward pass; backward is a
/// single reverse sweep. A tape is confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable input. Leaves are numbered in registration
  /// order and the gradient vector returned by backward follows that order.
  Var leaf(double value);
  std::vector<Var> leaves(std::span<const double> values);

  Var record(Primitive p, double value, const Var& a, double da);
  Var record(Primitive p, double value, const Var& a, double da, const Var& b, double db);

  /// Inner product as a single node.
  Var dot(std::span<const Var> a, std::span<const Var> b);

  /// y = W x + b as one block node. `w` is row-major (out x in). Falls back to
  /// scalar nodes when the weights are not contiguous leaves.
  std::vector<Var> dense(std::span<const Var> w, std::span<const Var> b, std::span<const Var> x);

  /// Accumulates d loss / d leaf into `grad` (length leaf_count()).
  void backward(const Var& loss, std::span<double> grad);
  std::vector<double> backward(const Var& loss);

  void clear();

  std::size_t size() const { return values_.size(); }
  std::size_t leaf_count() const { return leaf_nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Adjoint of a node after backward; zero for constants.
  double adjoint(const Var& v) const;

 private:
  struct DenseOp {
    std::uint32_t n_in, n_out;
    std::uint32_t in_offset;  // into dense_inputs_
    std::uint32_t w_node, b_node, out_node;
  };

  std::uint32_t push_node(double value);
  std::uint32_t materialize(const Var& v);
  void check(Primitive p, double value) const;

  std::vector<double> values_;
  std::vector<std::uint32_t> edge_end_;  // CSR: edges of node i are [edge_end_[i-1], edge_end_[i])
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  std::vector<DenseOp> dense_ops_;
  std::vector<std::uint32_t> dense_inputs_;
  std::vector<std::uint32_t> leaf_nodes_;
  std::vector<double> adjoints_;
  bool consumed_ = false;
};

/// Thread-local active tape; operators on non-constant Vars record onto it.
Tape* active_tape() noexcept;

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

namespace detail {
Tape& require_tape(Primitive p);

inline Var unary(Primitive p, const Var& a, double value, double da) {
  if (a.is_constant()) return Var(value);
  return require_tape(p).record(p, value, a, da);
}

inline Var binary(Primitive p, const Var& a, const Var& b, double value, double da, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  return require_tape(p).record(p, value, a, da, b, db);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(Primitive::Add, a, b, a.val + b.val, 1.0, 1.0);
}
inline Var operator+(const Var& a, double b) { return detail::unary(Primitive::Add, a, a.val + b, 1.0); }
inline Var operator+(double a, const Var& b) { return b + a; }

inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(Primitive::Sub, a, b, a.val - b.val, 1.0, -1.0);
}
inline Var operator-(const Var& a, double b) { return detail::unary(Primitive::Sub, a, a.val - b, 1.0); }
inline Var operator-(double a, const Var& b) { return detail::unary(Primitive::Sub, b, a - b.val, -1.0); }
inline Var operator-(const Var& a) { return detail::unary(Primitive::Neg, a, -a.val, -1.0); }

inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(Primitive::Mul, a, b, a.val * b.val, b.val, a.val);
}
inline Var operator*(const Var& a, double b) { return detail::unary(Primitive::Mul, a, a.val * b, b); }
inline Var operator*(double a, const Var& b) { return b * a; }

inline Var operator/(const Var& a, const Var& b) {
  const double q = a.val / b.val;
  return detail::binary(Primitive::Div, a, b, q, 1.0 / b.val, -q / b.val);
}
inline Var operator/(const Var& a, double b) { return detail::unary(Primitive::Div, a, a.val / b, 1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double q = a / b.val;
  return detail::unary(Primitive::Div, b, q, -q / b.val);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline Var sin(const Var& a) { return detail::unary(Primitive::Sin, a, std::sin(a.val), std::cos(a.val)); }
inline Var cos(const Var& a) { return detail::unary(Primitive::Cos, a, std::cos(a.val), -std::sin(a.val)); }
inline Var tan(const Var& a) {
  const double t = std::tan(a.val);
  return detail::unary(Primitive::Tan, a, t, 1.0 + t * t);
}
inline Var atan(const Var& a) {
  return detail::unary(Primitive::Atan, a, std::atan(a.val), 1.0 / (1.0 + a.val * a.val));
}
/// atan2(y, x)
inline Var atan2(const Var& y, const Var& x) {
  const double r2 = x.val * x.val + y.val * y.val;
  return detail::binary(Primitive::Atan2, y, x, std::atan2(y.val, x.val), x.val / r2, -y.val / r2);
}
inline Var exp(const Var& a) {
  const double e = std::exp(a.val);
  return detail::unary(Primitive::Exp, a, e, e);
}
inline Var log(const Var& a) { return detail::unary(Primitive::Log, a, std::log(a.val), 1.0 / a.val); }
inline Var log1p(const Var& a) {
  return detail::unary(Primitive::Log1p, a, std::log1p(a.val), 1.0 / (1.0 + a.val));
}
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.val);
  return detail::unary(Primitive::Sqrt, a, s, 0.5 / s);
}
inline Var pow(const Var& a, double b) {
  const double p = std::pow(a.val, b);
  return detail::unary(Primitive::Pow, a, p, b * std::pow(a.val, b - 1.0));
}
inline Var pow(const Var& a, const Var& b) {
  const double p = std::pow(a.val, b.val);
  return detail::binary(Primitive::Pow, a, b, p, b.val * std::pow(a.val, b.val - 1.0), p * std::log(a.val));
}
inline Var tanh(const Var& a) {
  const double t = std::tanh(a.val);
  return detail::unary(Primitive::Tanh, a, t, 1.0 - t * t);
}
inline Var relu(const Var& a) {
  return a.val > 0.0 ? detail::unary(Primitive::Relu, a, a.val, 1.0) : Var(0.0);
}
inline Var min(const Var& a, const Var& b) {
  const bool first = a.val <= b.val;
  return detail::binary(Primitive::Min, a, b, first ? a.val : b.val, first ? 1.0 : 0.0, first ? 0.0 : 1.0);
}
inline Var max(const Var& a, const Var& b) {
  const bool first = a.val >= b.val;
  return detail::binary(Primitive::Max, a, b, first ? a.val : b.val, first ? 1.0 : 0.0, first ? 0.0 : 1.0);
}
inline Var abs(const Var& a) {
  return detail::unary(Primitive::Abs, a, std::abs(a.val), a.val >= 0.0 ? 1.0 : -1.0);
}

Var dot(std::span<const Var> a, std::span<const Var> b);

}  // namespace mflow::diff
