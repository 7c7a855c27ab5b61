#pragma once

#include <random>
#include <span>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

/// Surface area of the unit sphere S^D in R^{D+1}.
double sphere_area(int D);
double log_sphere_area(int D);

struct CylinderPoint {
  std::vector<double> z;  // unit vector in R^D
  double r = 0.0;
};

inline constexpr double kPoleGuard = 1e-12;

/// x -> (x_{1:D} / sqrt(1 - x_{D+1}^2), x_{D+1}). Throws PoleError at the poles.
CylinderPoint sphere_to_cylinder(std::span<const double> x);

/// (z, r) -> (z sqrt(1 - r^2), r). The returned correction is the term added
/// to a log-density carried across the map, -(D/2 - 1) log(1 - r^2).
std::vector<double> cylinder_to_sphere(const CylinderPoint& p, double* log_correction = nullptr);

/// Uniform point on S^D from D+1 normalised standard normals.
void sample_sphere(std::mt19937_64& rng, std::span<double> x);

/// Unrolled recursive coordinates of a point on S^D: heights r_D, ..., r_2
/// followed by the angle of the remaining circle. At a pole the lower
/// coordinates are taken from e_1.
struct Unrolled {
  std::vector<double> heights;
  double angle = 0.0;
};

Unrolled unroll_sphere(std::span<const double> x);

template <Scalar S>
void roll_sphere(std::span<const S> heights, const S& angle, std::span<S> x) {
  const std::size_t D = heights.size() + 1;
  x[0] = sm::cos(angle);
  x[1] = sm::sin(angle);
  for (std::size_t d = 2; d <= D; ++d) {
    const S& r = heights[D - d];
    const S scale = sm::sqrt((1.0 - r) * (1.0 + r));
    for (std::size_t i = 0; i < d; ++i) x[i] = x[i] * scale;
    x[d] = r;
  }
}

/// Orthonormal basis of the tangent space at unit x, as D columns of length
/// D+1 (column-major). Householder reflection exchanging e_1 and -x (or x,
/// whichever is better conditioned), applied to e_2..e_{D+1}.
template <Scalar S>
std::vector<S> tangent_basis(std::span<const S> x) {
  const std::size_t n = x.size();
  const bool flip = value_of(x[0]) > 0.0;  // use u = x + e1
  std::vector<S> u(x.begin(), x.end());
  u[0] = flip ? x[0] + 1.0 : x[0] - 1.0;
  // |u|^2 = 2 (1 +- x_1)
  const S norm2 = flip ? 2.0 * (1.0 + x[0]) : 2.0 * (1.0 - x[0]);
  std::vector<S> E((n - 1) * n);
  for (std::size_t j = 1; j < n; ++j) {
    const S c = 2.0 * u[j] / norm2;
    for (std::size_t i = 0; i < n; ++i) {
      S v = -(c * u[i]);
      if (i == j) v = v + 1.0;
      E[(j - 1) * n + i] = v;
    }
  }
  return E;
}

}  // namespace mflow
