#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mflow/sphere/expmap.hpp"

namespace mflow {

std::string field_name(ExpField f) { return f == ExpField::Radial ? "radial" : "polynomial"; }

ExpField parse_field(const std::string& name) {
  if (name == "radial") return ExpField::Radial;
  if (name == "polynomial") return ExpField::Polynomial;
  throw std::invalid_argument("unknown exp-map field '" + name + "'");
}

std::size_t field_param_count(ExpField kind, int D, int K) {
  const auto n = static_cast<std::size_t>(D) + 1;
  if (kind == ExpField::Radial) {
    const auto k = static_cast<std::size_t>(K);
    return (k + 1) + k + k * n;
  }
  return n + n * (n + 1) / 2;
}

std::vector<double> tangent_pseudo_inverse(const Mat<double>& J, std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t D = n - 1;
  const auto E = tangent_basis<double>(x);
  const Mat<double> JE = tangent_jacobian<double>(J, E);
  // Cholesky of M = JE^T JE, then solve M P = JE^T column by column
  Mat<double> L(D, D);
  for (std::size_t j = 0; j < D; ++j) {
    for (std::size_t i = j; i < D; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += JE(r, i) * JE(r, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(s > 0.0)) throw InvError(InvError::Kind::NoConvergence, "exp-map Jacobian is singular");
        L(j, j) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  std::vector<double> out(n * n, 0.0);
  std::vector<double> col(D);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t k = 0; k < D; ++k) col[k] = JE(c, k);
    for (std::size_t k = 0; k < D; ++k) {
      for (std::size_t m = 0; m < k; ++m) col[k] -= L(k, m) * col[m];
      col[k] /= L(k, k);
    }
    for (std::size_t k = D; k-- > 0;) {
      for (std::size_t m = k + 1; m < D; ++m) col[k] -= L(m, k) * col[m];
      col[k] /= L(k, k);
    }
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < D; ++k) s += E[k * n + r] * col[k];
      out[r * n + c] = s;
    }
  }
  return out;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// exp_u(t) for tangent t.
std::vector<double> move_along(std::span<const double> u, std::span<const double> t) {
  const double len = norm(t);
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = len < kSmallStep ? u[i] + t[i] : u[i] * std::cos(len) + t[i] * std::sin(len) / len;
  }
  const double s = norm(out);
  for (auto& v : out) v /= s;
  return out;
}

}  // namespace

std::vector<double> expmap_invert(const ScalarField<double>& field, std::span<const double> y) {
  const std::size_t n = y.size();
  std::vector<double> u(y.begin(), y.end());
  auto residual = [&](std::span<const double> at, ExpStep<double>& step) {
    step = expmap_step<double>(field, at);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - step.value[i];
    return r;
  };
  ExpStep<double> step;
  auto r = residual(u, step);
  double err = norm(r);
  for (int it = 0; it < 100 && err > 1e-15; ++it) {
    const auto K = tangent_pseudo_inverse(step.J, u);
    std::vector<double> t(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) t[i] += K[i * n + j] * r[j];
    // damped: halve the step until the residual decreases
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      auto cand = move_along(u, t);
      ExpStep<double> cstep;
      auto cr = residual(cand, cstep);
      const double cerr = norm(cr);
      if (cerr < err) {
        u = std::move(cand);
        r = std::move(cr);
        step = std::move(cstep);
        err = cerr;
        improved = true;
        break;
      }
      for (auto& v : t) v *= 0.5;
    }
    if (!improved) break;
  }
  if (err > 1e-9) throw InvError(InvError::Kind::NoConvergence, "exp-map inverse did not converge");
  return u;
}

ExpMapFlow::ExpMapFlow(ExpMapSpec spec) : spec_(spec) {
  if (spec_.D < 1) throw std::invalid_argument("exp-map flow needs D >= 1");
  if (spec_.passes < 1) throw std::invalid_argument("exp-map flow needs at least one pass");
  if (spec_.field == ExpField::Radial && spec_.K < 1) throw std::invalid_argument("radial field needs K >= 1");
  per_pass_ = field_param_count(spec_.field, spec_.D, spec_.K);
}

std::string ExpMapFlow::describe() const {
  std::ostringstream os;
  os << "exp-map flow on S" << spec_.D << ": N_T=" << spec_.passes << ", " << field_name(spec_.field);
  if (spec_.field == ExpField::Radial) os << "[" << spec_.K << "]";
  return os.str();
}

std::vector<ParamBlock> ExpMapFlow::layout() const {
  std::vector<ParamBlock> out;
  for (int p = 0; p < spec_.passes; ++p) {
    ParamBlock b;
    b.name = "pass" + std::to_string(p) + "." + field_name(spec_.field);
    b.offset = per_pass_ * static_cast<std::size_t>(p);
    b.size = per_pass_;
    out.push_back(std::move(b));
  }
  return out;
}

void ExpMapFlow::init_params(std::span<double> params, std::mt19937_64& rng) const {
  if (params.size() != param_count()) throw DiffError(DiffError::Kind::Shape, "exp-map init: wrong length");
  std::normal_distribution<double> small(0.0, spec_.init_scale);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<std::size_t>(spec_.D) + 1;
  const auto k = static_cast<std::size_t>(spec_.K);
  for (int p = 0; p < spec_.passes; ++p) {
    auto block = params.subspan(per_pass_ * static_cast<std::size_t>(p), per_pass_);
    if (spec_.field == ExpField::Polynomial) {
      for (auto& v : block) v = small(rng);
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) block[i] = small(rng);
    block[k] = spec_.init_slack;
    for (std::size_t i = 0; i < k; ++i) block[k + 1 + i] = softplus_inverse(1.0) + small(rng);
    for (std::size_t i = 0; i < k * n; ++i) block[2 * k + 1 + i] = unit(rng);
  }
}

template <Scalar S>
S ExpMapFlow::forward_impl(std::span<const S> p, std::span<const double> u, std::span<S> x) const {
  std::vector<S> cur(u.begin(), u.end());
  S log_q = log_base();
  for (int pass = 0; pass < spec_.passes; ++pass) {
    const auto f = field<S>(p, pass);
    auto step = expmap_step<S>(f, cur);
    log_q = log_q - expmap_log_volume<S>(step.J, cur);
    cur = std::move(step.value);
  }
  std::copy(cur.begin(), cur.end(), x.begin());
  return log_q;
}

template <Scalar S>
S ExpMapFlow::log_prob_impl(std::span<const S> p, std::span<const double> x) const {
  const std::size_t n = x.size();
  if (n != point_dim()) throw DomainError("exp-map log_prob: wrong point dimension");
  // preimages of every pass, solved in plain arithmetic
  std::vector<std::vector<double>> pre(static_cast<std::size_t>(spec_.passes));
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> p_plain(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) p_plain[i] = value_of(p[i]);
  for (int pass = spec_.passes - 1; pass >= 0; --pass) {
    y = expmap_invert(field<double>(p_plain, pass), y);
    pre[static_cast<std::size_t>(pass)] = y;
  }
  S log_q = log_base();
  std::vector<S> target(x.begin(), x.end());
  for (int pass = spec_.passes - 1; pass >= 0; --pass) {
    const auto& u0 = pre[static_cast<std::size_t>(pass)];
    const auto f = field<S>(p, pass);
    std::vector<S> u(u0.begin(), u0.end());
    if constexpr (std::is_same_v<S, Var>) {
      // one implicit-function step carries d u / d params
      const auto image = expmap_step<S>(f, std::span<const S>(u), false).value;
      const auto K = tangent_pseudo_inverse(expmap_step<double>(field<double>(p_plain, pass), u0).J, u0);
      for (std::size_t i = 0; i < n; ++i) {
        S s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s = s + K[i * n + j] * (image[j] - target[j]);
        u[i] = u0[i] - s;
      }
    }
    const auto step = expmap_step<S>(f, std::span<const S>(u));
    log_q = log_q - expmap_log_volume<S>(step.J, u);
    target = std::move(u);
  }
  return log_q;
}

double ExpMapFlow::forward(std::span<const double> p, std::span<const double> u, std::span<double> x) const {
  return forward_impl<double>(p, u, x);
}
Var ExpMapFlow::forward(std::span<const Var> p, std::span<const double> u, std::span<Var> x) const {
  return forward_impl<Var>(p, u, x);
}
double ExpMapFlow::log_prob(std::span<const double> p, std::span<const double> x) const {
  return log_prob_impl<double>(p, x);
}
Var ExpMapFlow::log_prob(std::span<const Var> p, std::span<const double> x) const {
  return log_prob_impl<Var>(p, x);
}

void ExpMapFlow::inverse(std::span<const double> p, std::span<const double> x, std::span<double> u) const {
  std::vector<double> y(x.begin(), x.end());
  for (int pass = spec_.passes - 1; pass >= 0; --pass) y = expmap_invert(field<double>(p, pass), y);
  std::copy(y.begin(), y.end(), u.begin());
}

}  // namespace mflow
