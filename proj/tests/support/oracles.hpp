#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's flow code.

#include <cmath>
#include <algorithm>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative error, measured against `floor` when both values are tiny.
inline double rel_err(double a, double b, double floor = 1e-2) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double circ_dist(double a, double b) {
  const double d = std::fmod(std::abs(a - b), two_pi);
  return std::min(d, two_pi - d);
}

/// Rational-quadratic bin evaluated straight from the textbook construction:
/// knots (xk, yk), (xk1, yk1) with derivatives dk, dk1.
inline double rq_segment(double xk, double xk1, double yk, double yk1, double dk, double dk1, double t) {
  const double w = xk1 - xk;
  const double h = yk1 - yk;
  const double s = h / w;
  const double xi = (t - xk) / w;
  const double num = h * (s * xi * xi + dk * xi * (1 - xi));
  const double den = s + (dk1 + dk - 2 * s) * xi * (1 - xi);
  return yk + num / den;
}

inline double rq_segment_deriv(double xk, double xk1, double yk, double yk1, double dk, double dk1, double t) {
  const double w = xk1 - xk;
  const double h = yk1 - yk;
  const double s = h / w;
  const double xi = (t - xk) / w;
  const double den = s + (dk1 + dk - 2 * s) * xi * (1 - xi);
  return s * s * (dk1 * xi * xi + 2 * s * xi * (1 - xi) + dk * (1 - xi) * (1 - xi)) / (den * den);
}

/// Chord projection through an interior point w, evaluated on complex numbers:
/// h(z) = (1 - |w|^2)(z - w)/|z - w|^2 - w.
inline void mobius_point(double wx, double wy, double zx, double zy, double& hx, double& hy) {
  const double dx = zx - wx, dy = zy - wy;
  const double n2 = dx * dx + dy * dy;
  const double g = 1 - wx * wx - wy * wy;
  hx = g * dx / n2 - wx;
  hy = g * dy / n2 - wy;
}

/// Composite trapezoid rule of f on [a, b] with n points.
inline double trapezoid(const std::vector<double>& values, double a, double b) {
  const double h = (b - a) / static_cast<double>(values.size() - 1);
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
  return s * h;
}

/// Orthonormal basis of the tangent space at unit x by Gram-Schmidt on the
/// standard basis (independent of the library's reflection construction).
inline std::vector<std::vector<double>> gram_schmidt_tangent(const std::vector<double>& x) {
  std::vector<std::vector<double>> basis{x};
  for (std::size_t k = 0; k < x.size() && basis.size() < x.size(); ++k) {
    std::vector<double> v(x.size(), 0.0);
    v[k] = 1.0;
    for (const auto& b : basis) {
      double d = 0;
      for (std::size_t i = 0; i < v.size(); ++i) d += v[i] * b[i];
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * b[i];
    }
    double n = 0;
    for (double c : v) n += c * c;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (double& c : v) c /= n;
    basis.push_back(v);
  }
  basis.erase(basis.begin());
  return basis;
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(std::vector<std::vector<double>> m) {
  const std::size_t n = m.size();
  double det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    if (m[c][c] == 0) return 0;
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

/// log sqrt det of the Gram matrix of the differential of a sphere map F at
/// x, by central differences along great circles leaving x.
inline double sphere_map_log_volume(const std::function<std::vector<double>(const std::vector<double>&)>& F,
                                    const std::vector<double>& x, double h = 1e-5) {
  const auto basis = gram_schmidt_tangent(x);
  std::vector<std::vector<double>> cols;
  for (const auto& e : basis) {
    std::vector<double> up(x.size()), dn(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      up[i] = std::cos(h) * x[i] + std::sin(h) * e[i];
      dn[i] = std::cos(h) * x[i] - std::sin(h) * e[i];
    }
    const auto fu = F(up), fd = F(dn);
    std::vector<double> col(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) col[i] = (fu[i] - fd[i]) / (2 * std::sin(h));
    cols.push_back(col);
  }
  std::vector<std::vector<double>> gram(cols.size(), std::vector<double>(cols.size()));
  for (std::size_t a = 0; a < cols.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += cols[a][i] * cols[b][i];
      gram[a][b] = s;
    }
  return 0.5 * std::log(determinant(gram));
}

/// Point on S^2 from colatitude and longitude.
inline std::vector<double> s2_point(double colat, double lon) {
  return {std::sin(colat) * std::cos(lon), std::sin(colat) * std::sin(lon), std::cos(colat)};
}

/// Integral over S^2 of density(x) on an nlon x nlat longitude-colatitude
/// grid, midpoint rule in colatitude, sin-colatitude weights.
inline double s2_quadrature(const std::function<double(const std::vector<double>&)>& density, int nlon, int nlat) {
  const double dl = two_pi / nlon, dc = pi / nlat;
  double total = 0;
  for (int j = 0; j < nlat; ++j) {
    const double c = (j + 0.5) * dc;
    for (int i = 0; i < nlon; ++i) total += density(s2_point(c, i * dl)) * std::sin(c) * dl * dc;
  }
  return total;
}

/// von Mises-Fisher log-density on S^2.
inline double vmf_log_density(double kappa, const std::vector<double>& mu, const std::vector<double>& x) {
  double d = 0;
  for (std::size_t i = 0; i < 3; ++i) d += mu[i] * x[i];
  // kappa / (4 pi sinh kappa) = kappa / (2 pi (e^k - e^-k))
  return std::log(kappa) + kappa * d - std::log(2 * pi) - kappa - std::log1p(-std::exp(-2 * kappa));
}

/// Geodesic x'' = -|x'|^2 x integrated with RK4 from x(0) = x, x'(0) = v
/// over unit time.
inline std::vector<double> geodesic_rk4(const std::vector<double>& x, const std::vector<double>& v, int steps) {
  const std::size_t n = x.size();
  std::vector<double> s(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = x[i];
    s[n + i] = v[i];
  }
  auto rhs = [n](const std::vector<double>& y) {
    double sp = 0;
    for (std::size_t i = 0; i < n; ++i) sp += y[n + i] * y[n + i];
    std::vector<double> d(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = y[n + i];
      d[n + i] = -sp * y[i];
    }
    return d;
  };
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    auto k1 = rhs(s);
    std::vector<double> t(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) t[i] = s[i] + 0.5 * h * k1[i];
    auto k2 = rhs(t);
    for (std::size_t i = 0; i < 2 * n; ++i) t[i] = s[i] + 0.5 * h * k2[i];
    auto k3 = rhs(t);
    for (std::size_t i = 0; i < 2 * n; ++i) t[i] = s[i] + h * k3[i];
    auto k4 = rhs(t);
    for (std::size_t i = 0; i < 2 * n; ++i) s[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return {s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace oracle
