#pragma once

// Exponential-map flows on S^D: f(x) = exp_x(grad phi(x)) for a scalar field
// phi that is either a sum of radial bumps or a quadratic polynomial. The
// density update needs det(E^T J^T J E) with J the ambient Jacobian of the
// formula extended to R^{D+1}; J is assembled analytically.

#include <span>
#include <string>
#include <vector>

#include "mflow/model.hpp"
#include "mflow/sphere/geometry.hpp"

namespace mflow {

enum class ExpField { Radial, Polynomial };

std::string field_name(ExpField f);
ExpField parse_field(const std::string& name);

inline constexpr double kMinConcentration = 1e-3;

/// Small dense row-major matrix.
template <Scalar S>
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<S> a;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, S(0.0)) {}
  S& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

/// log det of a symmetric positive definite matrix via Cholesky. Throws
/// DiffError(NonFinite) if a pivot is not positive.
template <Scalar S>
S spd_log_det(Mat<S> m) {
  const std::size_t n = m.rows;
  S out = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    S d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d = d - m(j, k) * m(j, k);
    if (!(value_of(d) > 0.0)) throw DiffError(DiffError::Kind::NonFinite, "exp-map volume factor is not positive");
    const S l = sm::sqrt(d);
    m(j, j) = l;
    out = out + 2.0 * sm::log(l);
    for (std::size_t i = j + 1; i < n; ++i) {
      S s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s = s - m(i, k) * m(j, k);
      m(i, j) = s / l;
    }
  }
  return out;
}

/// Constrained parameters of one transform.
template <Scalar S>
struct ScalarField {
  ExpField kind = ExpField::Radial;
  std::size_t n = 0;           // ambient dimension D+1
  std::vector<S> alpha, beta;  // radial, K each
  std::vector<S> mu;           // radial: K x n unit rows; polynomial: n
  Mat<S> A{0, 0};              // polynomial, symmetric n x n

  S phi(std::span<const S> x) const;
  std::vector<S> grad(std::span<const S> x) const;
  Mat<S> hessian(std::span<const S> x) const;
};

/// Raw layout per transform.
///   radial:      [K+1 weight logits (last is slack), K concentration logits, K*(D+1) centres]
///   polynomial:  [D+1 linear, (D+1)(D+2)/2 upper triangle of A]
std::size_t field_param_count(ExpField kind, int D, int K);

template <Scalar S>
ScalarField<S> make_field(ExpField kind, int D, int K, std::span<const S> raw) {
  ScalarField<S> f;
  f.kind = kind;
  f.n = static_cast<std::size_t>(D) + 1;
  const std::size_t n = f.n;
  if (raw.size() != field_param_count(kind, D, K)) {
    throw DiffError(DiffError::Kind::Shape, "exp-map field: wrong parameter count");
  }
  if (kind == ExpField::Radial) {
    const std::size_t k = static_cast<std::size_t>(K);
    const auto w = softmax<S>(raw.subspan(0, k + 1));
    f.alpha.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = 0; i < k; ++i) f.beta.push_back(softplus(raw[k + 1 + i]) + kMinConcentration);
    const auto centres = raw.subspan(2 * k + 1);
    for (std::size_t i = 0; i < k; ++i) {
      S norm2 = 0.0;
      for (std::size_t d = 0; d < n; ++d) norm2 = norm2 + centres[i * n + d] * centres[i * n + d];
      const S norm = sm::sqrt(norm2);
      for (std::size_t d = 0; d < n; ++d) f.mu.push_back(centres[i * n + d] / norm);
    }
    return f;
  }
  // scale so that |mu|_1 + |A|_1 = t / (1 + t) < 1
  S total = 0.0;
  for (std::size_t d = 0; d < n; ++d) total = total + sm::abs(raw[d]);
  Mat<S> A(n, n);
  std::size_t at = n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j, ++at) {
      A(i, j) = raw[at];
      A(j, i) = raw[at];
      total = total + (i == j ? 1.0 : 2.0) * sm::abs(raw[at]);
    }
  }
  const S scale = 1.0 / (1.0 + total);
  for (std::size_t d = 0; d < n; ++d) f.mu.push_back(raw[d] * scale);
  for (auto& v : A.a) v = v * scale;
  f.A = std::move(A);
  return f;
}

template <Scalar S>
S ScalarField<S>::phi(std::span<const S> x) const {
  S out = 0.0;
  if (kind == ExpField::Radial) {
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      S dot = 0.0;
      for (std::size_t d = 0; d < n; ++d) dot = dot + x[d] * mu[i * n + d];
      out = out + alpha[i] / beta[i] * sm::exp(beta[i] * (dot - 1.0));
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out = out + mu[i] * x[i];
    for (std::size_t j = 0; j < n; ++j) out = out + x[i] * A(i, j) * x[j];
  }
  return out;
}

template <Scalar S>
std::vector<S> ScalarField<S>::grad(std::span<const S> x) const {
  std::vector<S> g(n, S(0.0));
  if (kind == ExpField::Radial) {
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      S dot = 0.0;
      for (std::size_t d = 0; d < n; ++d) dot = dot + x[d] * mu[i * n + d];
      const S c = alpha[i] * sm::exp(beta[i] * (dot - 1.0));
      for (std::size_t d = 0; d < n; ++d) g[d] = g[d] + c * mu[i * n + d];
    }
    return g;
  }
  for (std::size_t i = 0; i < n; ++i) {
    S s = mu[i];
    for (std::size_t j = 0; j < n; ++j) s = s + 2.0 * A(i, j) * x[j];
    g[i] = s;
  }
  return g;
}

template <Scalar S>
Mat<S> ScalarField<S>::hessian(std::span<const S> x) const {
  Mat<S> H(n, n);
  if (kind == ExpField::Radial) {
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      S dot = 0.0;
      for (std::size_t d = 0; d < n; ++d) dot = dot + x[d] * mu[i * n + d];
      const S c = alpha[i] * beta[i] * sm::exp(beta[i] * (dot - 1.0));
      for (std::size_t r = 0; r < n; ++r) {
        const S cr = c * mu[i * n + r];
        for (std::size_t s = 0; s < n; ++s) H(r, s) = H(r, s) + cr * mu[i * n + s];
      }
    }
    return H;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) H(i, j) = 2.0 * A(i, j);
  return H;
}

inline constexpr double kSmallStep = 1e-12;

/// One exp-map step at x: the image (re-normalised), the ambient Jacobian of
/// the extended formula, and the tangential gradient v.
template <Scalar S>
struct ExpStep {
  std::vector<S> value;
  Mat<S> J{0, 0};
  std::vector<S> v;
};

template <Scalar S>
ExpStep<S> expmap_step(const ScalarField<S>& field, std::span<const S> x, bool with_jacobian = true) {
  const std::size_t n = x.size();
  const auto g = field.grad(x);
  S xg = 0.0;
  for (std::size_t i = 0; i < n; ++i) xg = xg + x[i] * g[i];
  ExpStep<S> out;
  out.v.resize(n);
  S nn2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.v[i] = g[i] - xg * x[i];
    nn2 = nn2 + out.v[i] * out.v[i];
  }
  const bool small = std::sqrt(value_of(nn2)) < kSmallStep;
  const S nn = small ? S(0.0) : sm::sqrt(nn2);
  const S c = small ? S(1.0) : sm::cos(nn);
  const S sn = small ? S(0.0) : sm::sin(nn);
  const S sigma = small ? S(1.0) : sn / nn;
  out.value.resize(n);
  S norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.value[i] = c * x[i] + sigma * out.v[i];
    norm2 = norm2 + out.value[i] * out.value[i];
  }
  const S norm = sm::sqrt(norm2);
  for (auto& y : out.value) y = y / norm;
  if (!with_jacobian) return out;

  // Dv = H - x (g^T + x^T H) - (x^T g) I
  const Mat<S> H = field.hessian(x);
  std::vector<S> xH(n, S(0.0));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) xH[j] = xH[j] + x[i] * H(i, j);
  Mat<S> Dv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Dv(i, j) = H(i, j) - x[i] * (g[j] + xH[j]);
      if (i == j) Dv(i, j) = Dv(i, j) - xg;
    }
  }
  out.J = Mat<S>(n, n);
  if (small) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out.J(i, j) = Dv(i, j) + (i == j ? 1.0 : 0.0);
    return out;
  }
  // J = c I - sin|v| x w^T + sigma Dv + sigma' v w^T,  w = Dv^T v / |v|
  std::vector<S> w(n, S(0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) w[j] = w[j] + Dv(i, j) * out.v[i];
    w[j] = w[j] / nn;
  }
  const S dsigma = (nn * c - sn) / nn2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      S e = sigma * Dv(i, j) + (dsigma * out.v[i] - sn * x[i]) * w[j];
      if (i == j) e = e + c;
      out.J(i, j) = e;
    }
  }
  return out;
}

/// J E as an (n x D) matrix.
template <Scalar S>
Mat<S> tangent_jacobian(const Mat<S>& J, std::span<const S> E) {
  const std::size_t n = J.rows;
  const std::size_t D = n - 1;
  Mat<S> JE(n, D);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < D; ++k) {
      S s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s = s + J(i, j) * E[k * n + j];
      JE(i, k) = s;
    }
  return JE;
}

/// log sqrt det(E^T J^T J E) at x.
template <Scalar S>
S expmap_log_volume(const Mat<S>& J, std::span<const S> x) {
  const auto E = tangent_basis<S>(x);
  const Mat<S> JE = tangent_jacobian<S>(J, E);
  const std::size_t D = JE.cols;
  Mat<S> M(D, D);
  for (std::size_t a = 0; a < D; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      S s = 0.0;
      for (std::size_t i = 0; i < JE.rows; ++i) s = s + JE(i, a) * JE(i, b);
      M(a, b) = s;
      M(b, a) = s;
    }
  return 0.5 * spd_log_det<S>(std::move(M));
}

/// Solves f(u) = y for one transform by Newton steps in the tangent space.
std::vector<double> expmap_invert(const ScalarField<double>& field, std::span<const double> y);

struct ExpMapSpec {
  int D = 2;
  int passes = 1;  // N_T
  ExpField field = ExpField::Radial;
  int K = 1;
  double init_slack = 3.0;  // initial slack logit, radial only
  double init_scale = 1e-2;
};

class ExpMapFlow final : public FlowModel {
 public:
  explicit ExpMapFlow(ExpMapSpec spec);

  const ExpMapSpec& spec() const { return spec_; }

  std::string manifold_tag() const override { return "S" + std::to_string(spec_.D); }
  std::string describe() const override;
  std::size_t point_dim() const override { return static_cast<std::size_t>(spec_.D) + 1; }
  std::size_t param_count() const override { return per_pass_ * static_cast<std::size_t>(spec_.passes); }
  std::vector<ParamBlock> layout() const override;
  void init_params(std::span<double> params, std::mt19937_64& rng) const override;

  double log_base() const override { return -log_sphere_area(spec_.D); }
  void sample_base(std::mt19937_64& rng, std::span<double> u) const override { sample_sphere(rng, u); }

  double forward(std::span<const double> p, std::span<const double> u, std::span<double> x) const override;
  Var forward(std::span<const Var> p, std::span<const double> u, std::span<Var> x) const override;
  double log_prob(std::span<const double> p, std::span<const double> x) const override;
  Var log_prob(std::span<const Var> p, std::span<const double> x) const override;
  void inverse(std::span<const double> p, std::span<const double> x, std::span<double> u) const override;

  template <Scalar S>
  ScalarField<S> field(std::span<const S> p, int pass) const {
    return make_field<S>(spec_.field, spec_.D, spec_.K, p.subspan(per_pass_ * static_cast<std::size_t>(pass), per_pass_));
  }

 private:
  template <Scalar S>
  S forward_impl(std::span<const S> p, std::span<const double> u, std::span<S> x) const;
  template <Scalar S>
  S log_prob_impl(std::span<const S> p, std::span<const double> x) const;

  ExpMapSpec spec_;
  std::size_t per_pass_ = 0;
};

}  // namespace mflow

namespace mflow {

/// E (JE)^+ at unit x, row-major n x n: maps an ambient residual to the
/// tangent step that cancels it to first order.
std::vector<double> tangent_pseudo_inverse(const Mat<double>& J, std::span<const double> x);

}  // namespace mflow
