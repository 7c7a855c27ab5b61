#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mflow/sphere/expmap.hpp"
#include "mflow/sphere/recursive.hpp"
#include "oracles.hpp"
#include "vmf_blocks.hpp"

using namespace mflow;

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  sample_sphere(rng, x);
  return x;
}

RecursiveSphereSpec small_recursive(int D, int passes) {
  RecursiveSphereSpec s;
  s.D = D;
  s.passes = passes;
  s.height_K = 8;
  s.circle = {CircleFamily::Mobius, 3, {}};
  s.hidden = {12, 12};
  return s;
}

// parameters visibly away from the identity
std::vector<double> wide_params(const RecursiveSphereSpec& spec, std::mt19937_64& rng, double scale) {
  RecursiveSphereSpec s = spec;
  s.output_scale = scale;
  s.init_jitter = scale;
  RecursiveSphereFlow wide(s);
  std::vector<double> p(wide.param_count());
  wide.init_params(p, rng);
  return p;
}

std::vector<double> identity_params(const RecursiveSphereFlow& flow) {
  RecursiveSphereSpec s = flow.spec();
  s.output_scale = 0.0;
  s.init_jitter = 0.0;
  std::vector<double> p(flow.param_count());
  std::mt19937_64 rng(0);
  RecursiveSphereFlow(s).init_params(p, rng);
  return p;
}

std::vector<double> expmap_params(const ExpMapFlow& flow, std::mt19937_64& rng, double slack, double scale) {
  ExpMapSpec s = flow.spec();
  s.init_slack = slack;
  s.init_scale = scale;
  std::vector<double> p(flow.param_count());
  ExpMapFlow(s).init_params(p, rng);
  return p;
}

std::vector<double> push(const FlowModel& flow, std::span<const double> p, const std::vector<double>& u) {
  std::vector<double> x(u.size());
  flow.forward(p, u, x);
  return x;
}

}  // namespace

TEST_CASE("cylinder coordinates of worked points") {
  const double eq[3] = {1, 0, 0};
  auto c = sphere_to_cylinder(eq);
  CHECK(c.z[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(c.z[1]) < 1e-15);
  CHECK(std::abs(c.r) < 1e-15);

  const double p[3] = {0.6, 0, 0.8};
  c = sphere_to_cylinder(p);
  CHECK(std::abs(c.z[0] - 1) < 1e-15);
  CHECK(std::abs(c.z[1]) < 1e-15);
  CHECK(std::abs(c.r - 0.8) < 1e-15);

  const double pole[3] = {0, 0, 1};
  CHECK_THROWS_AS(sphere_to_cylinder(pole), PoleError);
}

TEST_CASE("cylinder roundtrip away from the poles") {
  std::mt19937_64 rng(3);
  for (int D : {2, 3, 4}) {
    for (int k = 0; k < 1000; ++k) {
      auto x = random_unit(rng, D + 1);
      if (std::abs(x[static_cast<std::size_t>(D)]) > 0.999) continue;
      const auto back = cylinder_to_sphere(sphere_to_cylinder(x));
      for (int i = 0; i <= D; ++i) CHECK(std::abs(back[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) < 1e-12);
    }
  }
}

TEST_CASE("cylinder to sphere volume correction") {
  double corr = 1;
  for (double r : {-0.9, -0.3, 0.0, 0.5, 0.99}) {
    cylinder_to_sphere({{1.0, 0.0}, r}, &corr);
    CHECK(corr == 0.0);
  }
  // S^3 at r = 0.6: the density is divided by (1 - 0.36)^(1/2) = 0.8
  cylinder_to_sphere({{1.0, 0.0, 0.0}, 0.6}, &corr);
  CHECK(std::abs(std::exp(-corr) - 0.8) < 1e-15);
  CHECK(std::abs(corr + std::log(0.8)) < 1e-15);
  for (int D : {3, 4, 5}) {
    std::vector<double> z(static_cast<std::size_t>(D), 0.0);
    z[0] = 1;
    cylinder_to_sphere({z, 0.0}, &corr);
    CHECK(corr == 0.0);
  }
  CHECK_THROWS_AS(cylinder_to_sphere({{1.0, 0.0, 0.0}, 1.0}), PoleError);
}

TEST_CASE("sphere areas") {
  CHECK(sphere_area(1) == doctest::Approx(oracle::two_pi));
  CHECK(sphere_area(2) == doctest::Approx(4 * oracle::pi));
  CHECK(sphere_area(3) == doctest::Approx(2 * oracle::pi * oracle::pi));
}

TEST_CASE("tangent basis") {
  SUBCASE("at e1 the basis is e2..e_{D+1}") {
    const std::vector<double> e1 = {1, 0, 0, 0};
    const auto E = tangent_basis<double>(e1);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(E[k * 4 + i] - (i == k + 1 ? 1.0 : 0.0)) < 1e-15);
  }
  SUBCASE("orthonormal and tangent") {
    std::mt19937_64 rng(5);
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
      const int n = 2 + k % 3;
      auto x = random_unit(rng, n + 1);
      if (k % 1000 == 0) x = std::vector<double>(static_cast<std::size_t>(n + 1), 0.0), x[0] = -1;
      const auto E = tangent_basis<double>(x);
      const auto m = static_cast<std::size_t>(n + 1);
      for (std::size_t a = 0; a < m - 1; ++a) {
        double xa = 0;
        for (std::size_t i = 0; i < m; ++i) xa += E[a * m + i] * x[i];
        worst = std::max(worst, std::abs(xa));
        for (std::size_t b = 0; b < m - 1; ++b) {
          double g = 0;
          for (std::size_t i = 0; i < m; ++i) g += E[a * m + i] * E[b * m + i];
          worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
        }
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("uniform sampling has mean near zero") {
  std::mt19937_64 rng(11);
  std::vector<double> mean(3, 0.0), x(3);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    sample_sphere(rng, x);
    for (int i = 0; i < 3; ++i) mean[static_cast<std::size_t>(i)] += x[static_cast<std::size_t>(i)] / n;
  }
  CHECK(std::sqrt(mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]) < 0.02);
}

TEST_CASE("identity recursive flow is uniform") {
  for (int D : {2, 3}) {
    RecursiveSphereFlow flow(small_recursive(D, 2));
    const auto p = identity_params(flow);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 50; ++k) {
      const auto x = random_unit(rng, D + 1);
      CHECK(std::abs(flow.log_prob(p, x) + std::log(sphere_area(D))) < 1e-12);
    }
    std::vector<double> mean(static_cast<std::size_t>(D + 1), 0.0);
    const auto s = sample_flow(flow, p, 100000, rng);
    for (std::size_t k = 0; k < s.size(); ++k)
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s.point(k)[i] / static_cast<double>(s.size());
    double norm2 = 0;
    for (double m : mean) norm2 += m * m;
    CHECK(std::sqrt(norm2) < 0.02);
  }
}

TEST_CASE("recursive flow reproduces the vMF density") {
  const double kappa = 10;
  const oracle::VmfBlocks blocks{kappa};
  const std::vector<double> mu = {0, 0, 1};
  std::mt19937_64 rng(17);
  double worst = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto x = random_unit(rng, 3);
    const double lq = recursive_log_prob<double>(2, 1, blocks, x);
    worst = std::max(worst, std::abs(lq - oracle::vmf_log_density(kappa, mu, x)));
  }
  CHECK(worst < 1e-6);
  // sampling side agrees with the analytic density too
  for (int k = 0; k < 1000; ++k) {
    const auto u = random_unit(rng, 3);
    std::vector<double> x(3);
    const double lq = recursive_forward<double>(2, 1, true, blocks, u, std::span<double>(x));
    CHECK(std::abs(lq - oracle::vmf_log_density(kappa, mu, x)) < 1e-6);
  }
}

TEST_CASE("recursive flow integrates to one on S^2") {
  std::mt19937_64 rng(23);
  RecursiveSphereSpec spec = small_recursive(2, 1);
  spec.circle = {CircleFamily::Mobius, 3, {}};
  for (int trial = 0; trial < 2; ++trial) {
    RecursiveSphereFlow flow(spec);
    const auto p = wide_params(spec, rng, 0.3);
    const double total = oracle::s2_quadrature([&](const std::vector<double>& x) { return std::exp(flow.log_prob(p, x)); }, 400, 200);
    CHECK(std::abs(total - 1) < 1e-2);
    spec.circle = {CircleFamily::Spline, 6, {}};
  }
}

TEST_CASE("recursive log density is finite next to the poles of S^3") {
  std::mt19937_64 rng(29);
  const RecursiveSphereSpec spec = small_recursive(3, 1);
  RecursiveSphereFlow flow(spec);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = wide_params(spec, rng, 0.5);
    for (double r : {1 - 1e-7, -(1 - 1e-7), 1 - 1e-3, -(1 - 1e-3)}) {
      auto z = random_unit(rng, 3);
      std::vector<double> x = {z[0], z[1], z[2], r};
      const double s = std::sqrt((1 - r) * (1 + r));
      for (int i = 0; i < 3; ++i) x[static_cast<std::size_t>(i)] *= s;
      CHECK(std::isfinite(flow.log_prob(p, x)));
      // also with the second height at the edge
      std::vector<double> y = {s * std::sqrt((1 - r) * (1 + r)), 0, s * r, x[3]};
      CHECK(std::isfinite(flow.log_prob(p, y)));
    }
  }
}

TEST_CASE("eliding the internal cylinder roundtrips changes nothing") {
  std::mt19937_64 rng(31);
  for (int D : {2, 3}) {
    RecursiveSphereSpec spec = small_recursive(D, 2);
    const auto p = wide_params(spec, rng, 0.4);
    RecursiveSphereFlow elided(spec);
    spec.elide = false;
    RecursiveSphereFlow explicit_flow(spec);
    for (int k = 0; k < 200; ++k) {
      const auto u = random_unit(rng, D + 1);
      std::vector<double> a(u.size()), b(u.size());
      const double la = elided.forward(p, u, a);
      const double lb = explicit_flow.forward(p, u, b);
      CHECK(std::abs(la - lb) < 1e-10);
      for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
    }
  }
}

TEST_CASE("recursive sample density agrees with log_prob") {
  std::mt19937_64 rng(37);
  for (int D : {2, 3}) {
    const RecursiveSphereSpec spec = small_recursive(D, 2);
    RecursiveSphereFlow flow(spec);
    const auto p = wide_params(spec, rng, 0.4);
    const auto s = sample_flow(flow, p, 2000, rng);
    double worst = 0, drift = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      worst = std::max(worst, std::abs(s.log_q[k] - flow.log_prob(p, s.point(k))));
      std::vector<double> u(s.dim);
      flow.inverse(p, s.point(k), u);
      drift = std::max(drift, std::abs(push(flow, p, u)[0] - s.point(k)[0]));
    }
    CHECK(worst < 1e-7);
    CHECK(drift < 1e-9);
    CHECK(sample_flow(flow, p, 0, rng).size() == 0);
  }
}

TEST_CASE("recursive flow gradients match finite differences") {
  std::mt19937_64 rng(41);
  for (int D : {2, 3}) {
    const RecursiveSphereSpec spec = small_recursive(D, 2);
    RecursiveSphereFlow flow(spec);
    const auto p = wide_params(spec, rng, 0.4);
    std::vector<std::vector<double>> batch;
    for (int k = 0; k < 4; ++k) batch.push_back(random_unit(rng, D + 1));
    // loss = mean[log q(x) - 3 x_0] over samples, and the density of fixed points
    auto loss_plain = [&](const std::vector<double>& q, bool sampled) {
      double s = 0;
      for (const auto& b : batch) {
        if (sampled) {
          std::vector<double> x(b.size());
          const double lq = flow.forward(q, b, x);
          s += lq - 3 * x[0];
        } else {
          s += flow.log_prob(q, b);
        }
      }
      return s / static_cast<double>(batch.size());
    };
    for (bool sampled : {true, false}) {
      diff::Tape tape;
      diff::TapeScope scope(tape);
      auto lp = tape.leaves(p);
      Var total = 0.0;
      for (const auto& b : batch) {
        if (sampled) {
          std::vector<Var> x(b.size());
          const Var lq = flow.forward(std::span<const Var>(lp), b, std::span<Var>(x));
          total = total + lq - 3.0 * x[0];
        } else {
          total = total + flow.log_prob(std::span<const Var>(lp), b);
        }
      }
      total = total / static_cast<double>(batch.size());
      CHECK(std::abs(total.val - loss_plain(p, sampled)) < 1e-12);
      const auto g = tape.backward(total);
      double worst = 0;
      for (std::size_t i = 0; i < p.size(); i += 5) {
        auto q = p;
        q[i] += 1e-5;
        const double up = loss_plain(q, sampled);
        q[i] -= 2e-5;
        const double dn = loss_plain(q, sampled);
        worst = std::max(worst, oracle::rel_err(g[i], (up - dn) / 2e-5));
      }
      CHECK(worst < 1e-3);
    }
  }
}

TEST_CASE("exp-map scalar fields") {
  std::mt19937_64 rng(43);
  SUBCASE("all weights zero gives the zero field") {
    std::vector<double> raw = {0.0, 0.0, 800.0, 0.3, -0.2, 1, 2, 3, -1, 0, 1};
    const auto f = make_field<double>(ExpField::Radial, 2, 2, raw);
    const auto x = random_unit(rng, 3);
    CHECK(f.phi(x) == 0.0);
    for (double g : f.grad(x)) CHECK(g == 0.0);
    ExpMapFlow flow({2, 1, ExpField::Radial, 2});
    std::vector<double> y(3);
    CHECK(std::abs(flow.forward(raw, x, y) + std::log(4 * oracle::pi)) < 1e-15);
    for (int i = 0; i < 3; ++i) CHECK(y[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)]);
  }
  SUBCASE("at the centre phi = alpha / beta") {
    std::vector<double> raw = {0.4, -0.7, 1.1, 0.2, 0.5, -1.5};
    const auto f = make_field<double>(ExpField::Radial, 2, 1, raw);
    const double alpha = std::exp(0.4) / (std::exp(0.4) + std::exp(-0.7));
    const double beta = std::log1p(std::exp(1.1)) + 1e-3;
    const double n = std::sqrt(0.04 + 0.25 + 2.25);
    const std::vector<double> mu = {0.2 / n, 0.5 / n, -1.5 / n};
    CHECK(std::abs(f.phi(mu) - alpha / beta) < 1e-14);
  }
  SUBCASE("ambient gradient and Hessian match finite differences") {
    for (ExpField kind : {ExpField::Radial, ExpField::Polynomial}) {
      const int K = 3;
      std::vector<double> raw(field_param_count(kind, 2, K));
      std::normal_distribution<double> nd(0, 1);
      for (auto& v : raw) v = nd(rng);
      const auto f = make_field<double>(kind, 2, K, raw);
      const auto x = random_unit(rng, 3);
      const auto g = f.grad(x);
      const auto H = f.hessian(x);
      for (std::size_t i = 0; i < 3; ++i) {
        auto up = x, dn = x;
        up[i] += 1e-6;
        dn[i] -= 1e-6;
        CHECK(std::abs(g[i] - (f.phi(up) - f.phi(dn)) / 2e-6) < 1e-6);
        const auto gu = f.grad(up), gd = f.grad(dn);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(H(j, i) - (gu[j] - gd[j]) / 2e-6) < 1e-6);
      }
    }
  }
  SUBCASE("polynomial constraint holds strictly") {
    std::vector<double> raw(field_param_count(ExpField::Polynomial, 3, 0));
    std::normal_distribution<double> nd(0, 5);
    for (auto& v : raw) v = nd(rng);
    const auto f = make_field<double>(ExpField::Polynomial, 3, 0, raw);
    double l1 = 0;
    for (double m : f.mu) l1 += std::abs(m);
    for (double a : f.A.a) l1 += std::abs(a);
    CHECK(l1 < 1.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(f.A(i, j) == f.A(j, i));
  }
}

TEST_CASE("exp-map output stays on the sphere") {
  std::mt19937_64 rng(47);
  for (ExpField kind : {ExpField::Radial, ExpField::Polynomial}) {
    ExpMapFlow flow({2, 3, kind, 4});
    const auto p = expmap_params(flow, rng, 0.0, 1.0);
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
      const auto y = push(flow, p, random_unit(rng, 3));
      worst = std::max(worst, std::abs(std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) - 1));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("exp-map step follows the geodesic") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> raw = {0.5, -0.5, 0.3};
    const auto mu = random_unit(rng, 3);
    raw.insert(raw.end(), mu.begin(), mu.end());
    const auto f = make_field<double>(ExpField::Radial, 2, 1, raw);
    // x orthogonal to mu
    auto x = random_unit(rng, 3);
    double d = x[0] * mu[0] + x[1] * mu[1] + x[2] * mu[2];
    for (int i = 0; i < 3; ++i) x[static_cast<std::size_t>(i)] -= d * mu[static_cast<std::size_t>(i)];
    const double n = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    for (double& c : x) c /= n;
    // v = alpha e^{-beta} mu
    const double c = f.alpha[0] * std::exp(-f.beta[0]);
    const std::vector<double> v = {c * mu[0], c * mu[1], c * mu[2]};
    const auto ref = oracle::geodesic_rk4(x, v, 2000);
    const auto got = expmap_step<double>(f, x, false).value;
    for (int i = 0; i < 3; ++i) CHECK(std::abs(got[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)]) < 1e-10);
  }
}

TEST_CASE("exp-map volume factor matches a finite-difference Jacobian") {
  std::mt19937_64 rng(59);
  for (ExpField kind : {ExpField::Radial, ExpField::Polynomial}) {
    for (int D : {2, 3}) {
      ExpMapFlow flow({D, 1, kind, 3});
      for (int trial = 0; trial < 5; ++trial) {
        const auto p = expmap_params(flow, rng, -1.0, 1.0);
        const auto u = random_unit(rng, D + 1);
        std::vector<double> x(u.size());
        const double lq = flow.forward(p, u, x);
        const double ref = oracle::sphere_map_log_volume([&](const std::vector<double>& y) { return push(flow, p, y); }, u);
        CHECK(oracle::rel_err(-lq - std::log(sphere_area(D)), ref, 1e-12) < 1e-5);
      }
    }
  }
}

TEST_CASE("exp-map stack matches the end-to-end Jacobian") {
  std::mt19937_64 rng(61);
  for (ExpField kind : {ExpField::Radial, ExpField::Polynomial}) {
    ExpMapFlow flow({2, 5, kind, 2});
    const auto p = expmap_params(flow, rng, 0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const auto u = random_unit(rng, 3);
      std::vector<double> x(3);
      const double lq = flow.forward(p, u, x);
      const double ref = -std::log(4 * oracle::pi) - oracle::sphere_map_log_volume([&](const std::vector<double>& y) { return push(flow, p, y); }, u);
      CHECK(std::abs(lq - ref) < 1e-4);
    }
  }
}

TEST_CASE("exp-map inverse and density through the inverse") {
  std::mt19937_64 rng(67);
  for (ExpField kind : {ExpField::Radial, ExpField::Polynomial}) {
    ExpMapFlow flow({2, 4, kind, 3});
    const auto p = expmap_params(flow, rng, 0.0, 1.0);
    double worst_x = 0, worst_lq = 0;
    for (int k = 0; k < 500; ++k) {
      const auto u = random_unit(rng, 3);
      std::vector<double> x(3), back(3);
      const double lq = flow.forward(p, u, x);
      flow.inverse(p, x, back);
      for (int i = 0; i < 3; ++i) worst_x = std::max(worst_x, std::abs(back[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(i)]));
      worst_lq = std::max(worst_lq, std::abs(lq - flow.log_prob(p, x)));
    }
    CHECK(worst_x < 1e-10);
    CHECK(worst_lq < 1e-8);
    const double total = oracle::s2_quadrature([&](const std::vector<double>& x) { return std::exp(flow.log_prob(p, x)); }, 400, 200);
    CHECK(std::abs(total - 1) < 1e-2);
  }
}

TEST_CASE("exp-map gradients match finite differences") {
  std::mt19937_64 rng(71);
  for (ExpField kind : {ExpField::Radial, ExpField::Polynomial}) {
    ExpMapFlow flow({2, 3, kind, 2});
    const auto p = expmap_params(flow, rng, 0.0, 1.0);
    std::vector<std::vector<double>> batch;
    for (int k = 0; k < 4; ++k) batch.push_back(random_unit(rng, 3));
    auto loss_plain = [&](const std::vector<double>& q, bool sampled) {
      double s = 0;
      for (const auto& b : batch) {
        if (sampled) {
          std::vector<double> x(3);
          const double lq = flow.forward(q, b, x);
          s += lq - 3 * x[2];
        } else {
          s += flow.log_prob(q, b);
        }
      }
      return s / 4;
    };
    for (bool sampled : {true, false}) {
      diff::Tape tape;
      diff::TapeScope scope(tape);
      auto lp = tape.leaves(p);
      Var total = 0.0;
      for (const auto& b : batch) {
        if (sampled) {
          std::vector<Var> x(3);
          const Var lq = flow.forward(std::span<const Var>(lp), b, std::span<Var>(x));
          total = total + lq - 3.0 * x[2];
        } else {
          total = total + flow.log_prob(std::span<const Var>(lp), b);
        }
      }
      total = total / 4.0;
      CHECK(std::abs(total.val - loss_plain(p, sampled)) < 1e-10);
      const auto g = tape.backward(total);
      double worst = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        auto q = p;
        q[i] += 1e-5;
        const double up = loss_plain(q, sampled);
        q[i] -= 2e-5;
        const double dn = loss_plain(q, sampled);
        worst = std::max(worst, oracle::rel_err(g[i], (up - dn) / 2e-5));
      }
      CHECK(worst < 1e-3);
    }
  }
}
