#pragma once

#include <string>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

struct Factor {
  enum class Kind { Circle, Interval };
  Kind kind = Kind::Circle;
  double a = 0.0;
  double b = kTwoPi;

  static Factor circle() { return {Kind::Circle, 0.0, kTwoPi}; }
  static Factor interval(double a, double b) { return {Kind::Interval, a, b}; }
  bool is_circle() const { return kind == Kind::Circle; }
  double measure() const { return b - a; }
};

/// Ordered product of circles and closed intervals.
struct ProductManifold {
  std::vector<Factor> factors;

  static ProductManifold torus(int D);
  /// Parses "T<D>" or a signature string of 'C' (circle) and 'I' (interval [-1,1]).
  static ProductManifold parse(const std::string& tag);

  std::size_t dim() const { return factors.size(); }
  bool is_torus() const;
  std::string tag() const;
  double log_measure() const;
  /// Width of the conditioner input for the given factor indices.
  std::size_t embed_dim(const std::vector<int>& idx) const;
};

}  // namespace mflow
