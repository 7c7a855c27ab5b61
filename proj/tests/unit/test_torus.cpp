#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mflow/torus/coupling.hpp"
#include "oracles.hpp"

using namespace mflow;

namespace {

TorusFlowSpec make_spec(CircleSpec circle, int layers, const std::string& manifold = "T2") {
  TorusFlowSpec s;
  s.manifold = ProductManifold::parse(manifold);
  s.circle = circle;
  s.layers = layers;
  s.interval_K = 6;
  s.hidden = {16, 16};
  return s;
}

// a flow visibly away from the identity
std::vector<double> random_flow_params(const TorusFlow& flow, std::mt19937_64& rng, double scale) {
  TorusFlowSpec s = flow.spec();
  s.output_scale = scale;
  s.init_jitter = scale;
  TorusFlow wide(s);
  std::vector<double> p(wide.param_count());
  wide.init_params(p, rng);
  return p;
}

const CircleSpec kTransformers[] = {
    {CircleFamily::Mobius, 2, {}},
    {CircleFamily::Spline, 6, {}},
    {CircleFamily::Ncp, 2, {}},
    {CircleFamily::Fourier, 0, {1, 2}},
};

double grid_integral(const TorusFlow& flow, std::span<const double> p, int n) {
  // periodic trapezoid rule; intervals use the closed rule
  const auto& f = flow.spec().manifold.factors;
  auto node = [&](int k, int i, double& w) {
    const double h = f[k].measure() / (f[k].is_circle() ? n : n - 1);
    w = h;
    if (!f[k].is_circle() && (i == 0 || i == n - 1)) w *= 0.5;
    return f[k].a + h * i;
  };
  double total = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double wi, wj;
      const double x[2] = {node(0, i, wi), node(1, j, wj)};
      total += wi * wj * std::exp(flow.log_prob(p, x));
    }
  }
  return total;
}

}  // namespace

TEST_CASE("identity flow has the uniform density") {
  TorusFlow flow(make_spec({CircleFamily::Ncp, 1, {}}, 2));
  std::vector<double> p(flow.param_count());
  TorusFlowSpec s = flow.spec();
  s.init_jitter = 0.0;
  s.output_scale = 0.0;
  std::mt19937_64 rng(1);
  TorusFlow(s).init_params(p, rng);
  for (double a : {0.0, 1.0, 3.0}) {
    for (double b : {0.5, 6.0}) {
      const double x[2] = {a, b};
      CHECK(std::abs(flow.log_prob(p, x) + 2 * std::log(oracle::two_pi)) < 1e-12);
    }
  }
  CHECK(flow.log_base() == doctest::Approx(-2 * std::log(oracle::two_pi)));
}

TEST_CASE("masks alternate and every coordinate is transformed within two layers") {
  for (int D : {2, 3, 6}) {
    TorusFlow flow(make_spec({CircleFamily::Ncp, 1, {}}, 2, "T" + std::to_string(D)));
    std::vector<int> hit(D, 0);
    for (const auto& layer : flow.layers()) {
      for (int i : layer.active) ++hit[i];
      CHECK(layer.conditioned);
      CHECK(layer.net.inputs() == static_cast<int>(2 * layer.passive.size()));
    }
    for (int h : hit) CHECK(h == 1);
  }
  TorusFlow one(make_spec({CircleFamily::Ncp, 1, {}}, 3, "T1"));
  for (const auto& layer : one.layers()) CHECK_FALSE(layer.conditioned);
  TorusFlow mixed(make_spec({CircleFamily::Ncp, 1, {}}, 2, "CIC"));
  CHECK(mixed.layers()[0].net.inputs() == 4);  // circles 0 and 2
  CHECK(mixed.layers()[1].net.inputs() == 1);  // the interval
}

TEST_CASE("single coupling layer integrates to one on a 512 x 512 grid") {
  std::mt19937_64 rng(2);
  for (const auto& tr : kTransformers) {
    INFO(family_name(tr.family));
    TorusFlow flow(make_spec(tr, 1));
    const double scale = tr.family == CircleFamily::Spline ? 0.15 : 0.5;
    auto p = random_flow_params(flow, rng, scale);
    CHECK(std::abs(grid_integral(flow, p, 512) - 1.0) < 1e-3);
  }
}

TEST_CASE("circle-interval product integrates to one") {
  std::mt19937_64 rng(3);
  TorusFlow flow(make_spec({CircleFamily::Mobius, 2, {}}, 2, "CI"));
  auto p = random_flow_params(flow, rng, 0.15);
  CHECK(std::abs(grid_integral(flow, p, 512) - 1.0) < 1e-3);
}

TEST_CASE("sampling density agrees with log_prob and the inverse recovers the base point") {
  std::mt19937_64 rng(4);
  for (const auto& tr : kTransformers) {
    INFO(family_name(tr.family));
    TorusFlow flow(make_spec(tr, 4, "T3"));
    auto p = random_flow_params(flow, rng, 0.5);
    auto s = sample_flow(flow, p, 200, rng);
    double worst_lp = 0, worst_u = 0;
    std::mt19937_64 replay(99);
    for (std::size_t i = 0; i < s.size(); ++i) {
      worst_lp = std::max(worst_lp, std::abs(flow.log_prob(p, s.point(i)) - s.log_q[i]));
    }
    for (int i = 0; i < 200; ++i) {
      std::vector<double> u(3), x(3), back(3);
      flow.sample_base(replay, u);
      flow.forward(p, u, x);
      flow.inverse(p, x, back);
      for (int k = 0; k < 3; ++k) worst_u = std::max(worst_u, oracle::circ_dist(back[k], u[k]));
    }
    CHECK(worst_lp < 1e-8);
    CHECK(worst_u < 1e-8);
  }
  TorusFlow flow(make_spec({CircleFamily::Ncp, 1, {}}, 2));
  std::vector<double> p(flow.param_count());
  flow.init_params(p, rng);
  CHECK(sample_flow(flow, p, 0, rng).size() == 0);
}

TEST_CASE("a layer's inverse leaves its conditioning coordinates alone") {
  std::mt19937_64 rng(5);
  TorusFlow flow(make_spec({CircleFamily::Mobius, 3, {}}, 2, "T4"));
  auto p = random_flow_params(flow, rng, 0.5);
  std::vector<double> x = {0.3, 2.2, 4.1, 5.9};
  auto y = x;
  const auto& layer = flow.layers()[0];
  (void)flow.layer_inverse<double>(layer, p, y);
  for (int i : layer.passive) CHECK(y[i] == x[i]);
  for (int i : layer.active) CHECK(y[i] != x[i]);
}

TEST_CASE("identity flow samples are uniform in every marginal") {
  TorusFlowSpec s = make_spec({CircleFamily::Mobius, 1, {}}, 2);
  s.init_jitter = 0.0;
  s.output_scale = 0.0;
  TorusFlow flow(s);
  std::vector<double> p(flow.param_count());
  std::mt19937_64 rng(6);
  flow.init_params(p, rng);
  const std::size_t n = 100000;
  auto smp = sample_flow(flow, p, n, rng);
  for (int k = 0; k < 2; ++k) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = smp.points[i * 2 + k] / oracle::two_pi;
    std::sort(col.begin(), col.end());
    double d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d = std::max({d, std::abs(col[i] - double(i) / n), std::abs(col[i] - double(i + 1) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(double(n)));  // KS critical value, alpha = 0.01
  }
}

TEST_CASE("log_prob gradient matches finite differences") {
  std::mt19937_64 rng(7);
  for (const auto& tr : kTransformers) {
    INFO(family_name(tr.family));
    TorusFlow flow(make_spec(tr, 2));
    auto p = random_flow_params(flow, rng, 0.5);
    const double x[2] = {1.3, 4.4};
    diff::Tape tape;
    diff::TapeScope scope(tape);
    auto lp = tape.leaves(p);
    Var v = flow.log_prob(std::span<const Var>(lp), x);
    CHECK(std::abs(v.val - flow.log_prob(p, x)) < 1e-12);
    auto g = tape.backward(v);
    double worst = 0;
    for (std::size_t i = 0; i < p.size(); i += 3) {
      auto q = p;
      q[i] += 1e-5;
      const double up = flow.log_prob(q, x);
      q[i] -= 2e-5;
      const double dn = flow.log_prob(q, x);
      worst = std::max(worst, oracle::rel_err(g[i], (up - dn) / 2e-5));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("sampling-path gradient matches finite differences") {
  std::mt19937_64 rng(8);
  TorusFlow flow(make_spec({CircleFamily::Spline, 4, {}}, 2, "CI"));
  auto p = random_flow_params(flow, rng, 0.5);
  const double u[2] = {2.0, 0.3};
  diff::Tape tape;
  diff::TapeScope scope(tape);
  auto lp = tape.leaves(p);
  std::vector<Var> x(2);
  Var lq = flow.forward(std::span<const Var>(lp), u, x);
  auto g = tape.backward(lq + x[0] + x[1]);
  auto f = [&](const std::vector<double>& q) {
    double xx[2];
    const double l = flow.forward(q, u, xx);
    return l + xx[0] + xx[1];
  };
  double worst = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto q = p;
    q[i] += 1e-5;
    const double up = f(q);
    q[i] -= 2e-5;
    worst = std::max(worst, oracle::rel_err(g[i], (up - f(q)) / 2e-5));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("conditioner output is periodic in the conditioning angles") {
  std::mt19937_64 rng(9);
  TorusFlow flow(make_spec({CircleFamily::Mobius, 2, {}}, 2));
  auto p = random_flow_params(flow, rng, 0.5);
  const auto& layer = flow.layers()[0];
  for (double a : {0.0, 0.7, 3.0, 6.1}) {
    std::vector<double> x1 = {a, 1.0}, x2 = {a + oracle::two_pi, 1.0}, x3 = {a - oracle::two_pi, 1.0};
    auto r1 = flow.layer_raw<double>(layer, p, x1);
    auto r2 = flow.layer_raw<double>(layer, p, x2);
    auto r3 = flow.layer_raw<double>(layer, p, x3);
    for (std::size_t k = 0; k < r1.size(); ++k) {
      CHECK(std::abs(r1[k] - r2[k]) < 1e-12);
      CHECK(std::abs(r1[k] - r3[k]) < 1e-12);
    }
  }
}

TEST_CASE("points off the manifold are rejected") {
  TorusFlow flow(make_spec({CircleFamily::Ncp, 1, {}}, 2, "CI"));
  std::vector<double> p(flow.param_count());
  std::mt19937_64 rng(10);
  flow.init_params(p, rng);
  const double bad[2] = {1.0, 1.5};
  CHECK_THROWS_AS((void)flow.log_prob(p, bad), DomainError);
}
