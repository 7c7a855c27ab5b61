#include <cmath>
#include <random>

#include "mflow/errors.hpp"
#include "mflow/sphere/geometry.hpp"

namespace mflow {

double log_sphere_area(int D) {
  const double k = 0.5 * (D + 1);
  return std::log(2.0) + k * std::log(kPi) - std::lgamma(k);
}

double sphere_area(int D) { return std::exp(log_sphere_area(D)); }

CylinderPoint sphere_to_cylinder(std::span<const double> x) {
  const std::size_t D = x.size() - 1;
  const double r = x[D];
  if (std::abs(r) >= 1.0 - kPoleGuard) throw PoleError("point is at a pole of the cylinder map");
  CylinderPoint p;
  p.r = r;
  const double s = std::sqrt((1.0 - r) * (1.0 + r));
  p.z.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(D));
  for (auto& v : p.z) v /= s;
  return p;
}

std::vector<double> cylinder_to_sphere(const CylinderPoint& p, double* log_correction) {
  const std::size_t D = p.z.size();
  const double one_minus = (1.0 - p.r) * (1.0 + p.r);
  const double power = 0.5 * static_cast<double>(D) - 1.0;
  if (power != 0.0 && std::abs(p.r) >= 1.0 - kPoleGuard) {
    throw PoleError("cylinder height at +-1: density correction undefined");
  }
  if (log_correction != nullptr) *log_correction = power == 0.0 ? 0.0 : -power * std::log(one_minus);
  const double s = std::sqrt(std::max(one_minus, 0.0));
  std::vector<double> x(D + 1);
  for (std::size_t i = 0; i < D; ++i) x[i] = p.z[i] * s;
  x[D] = p.r;
  return x;
}

void sample_sphere(std::mt19937_64& rng, std::span<double> x) {
  std::normal_distribution<double> n01;
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& v : x) {
      v = n01(rng);
      norm2 += v * v;
    }
  } while (norm2 < 1e-300);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : x) v *= inv;
}

Unrolled unroll_sphere(std::span<const double> x) {
  const std::size_t D = x.size() - 1;
  std::vector<double> y(x.begin(), x.end());
  Unrolled u;
  u.heights.reserve(D - 1);
  for (std::size_t d = D; d >= 2; --d) {
    const double r = std::clamp(y[d], -1.0, 1.0);
    u.heights.push_back(r);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm2 += y[i] * y[i];
    const double norm = std::sqrt(norm2);
    if (norm <= kPoleGuard) {
      std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
      y[0] = 1.0;
    } else {
      for (std::size_t i = 0; i < d; ++i) y[i] /= norm;
    }
  }
  double a = std::atan2(y[1], y[0]);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  u.angle = a;
  return u;
}

}  // namespace mflow
