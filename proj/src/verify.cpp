#include "mflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "mflow/circle/circle_map.hpp"
#include "mflow/sphere/expmap.hpp"
#include "mflow/sphere/recursive.hpp"
#include "mflow/torus/coupling.hpp"
#include "mflow/train.hpp"

namespace mflow {

namespace {

const CircleSpec kFamilies[] = {
    {CircleFamily::Mobius, 1, {}}, {CircleFamily::Mobius, 4, {}}, {CircleFamily::Spline, 12, {}},
    {CircleFamily::Ncp, 1, {}},    {CircleFamily::Ncp, 3, {}},    {CircleFamily::Fourier, 0, {1, 2, 3}},
};

std::string label(const CircleSpec& s) {
  return std::string(family_name(s.family)) + "[" + std::to_string(s.family == CircleFamily::Fourier ? s.frequencies.size() : static_cast<std::size_t>(s.K)) + "]";
}

CheckRow below(const std::string& name, double value, double tol) { return {name, value, tol, value < tol}; }

double circ_dist(double a, double b) { return circular_distance(a, b); }

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-2}); }

std::vector<CheckRow> boundary(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(seed);
  for (const auto& spec : kFamilies) {
    double w0 = 0, w2 = 0, ws = 0, min_slope = 1e300;
    for (int draw = 0; draw < 100; ++draw) {
      CircleMap<double> m(spec, random_params(spec, rng, 1.5));
      w0 = std::max(w0, std::abs(m.core(0.0).value));
      w2 = std::max(w2, std::abs(m.core(kTwoPi).value - kTwoPi));
      ws = std::max(ws, std::abs(std::exp(m.core(0.0).log_det) - std::exp(m.core(kTwoPi).log_det)));
      for (int i = 0; i < 4096; ++i) min_slope = std::min(min_slope, std::exp(m.core(kTwoPi * i / 4095).log_det));
    }
    rows.push_back(below(label(spec) + " |f(0)|", w0, 1e-9));
    rows.push_back(below(label(spec) + " |f(2pi)-2pi|", w2, 1e-9));
    rows.push_back(below(label(spec) + " |f'(0)-f'(2pi)|", ws, 1e-8));
    rows.push_back({label(spec) + " min f' > 0", min_slope, 0.0, min_slope > 0.0});
  }
  return rows;
}

std::vector<CheckRow> roundtrip(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(seed);
  for (const auto& spec : kFamilies) {
    double worst = 0;
    for (int draw = 0; draw < 20; ++draw) {
      CircleMap<double> m(spec, random_params(spec, rng, 1.5, true));
      for (int i = 0; i < 10000; ++i) {
        const double t = kTwoPi * i / 10000;
        worst = std::max(worst, circ_dist(m.inverse(m.forward(t).value), t));
      }
    }
    rows.push_back(below(label(spec) + " inverse(forward)", worst, spec.analytic_inverse() ? 1e-10 : 1e-9));
  }
  // whole flows
  TorusFlowSpec ts;
  ts.manifold = ProductManifold::torus(3);
  ts.circle = {CircleFamily::Mobius, 3, {}};
  ts.layers = 4;
  ts.hidden = {16, 16};
  ts.output_scale = 0.3;
  ts.init_jitter = 0.3;
  RecursiveSphereSpec rs;
  rs.D = 3;
  rs.passes = 2;
  rs.height_K = 8;
  rs.circle = {CircleFamily::Mobius, 3, {}};
  rs.hidden = {16};
  rs.output_scale = 0.3;
  rs.init_jitter = 0.3;
  ExpMapSpec es;
  es.passes = 4;
  es.K = 3;
  es.init_slack = 0.0;
  es.init_scale = 1.0;
  const TorusFlow torus(ts);
  const RecursiveSphereFlow sphere(rs);
  const ExpMapFlow expmap(es);
  for (const FlowModel* m : {static_cast<const FlowModel*>(&torus), static_cast<const FlowModel*>(&sphere),
                             static_cast<const FlowModel*>(&expmap)}) {
    std::vector<double> p(m->param_count());
    m->init_params(p, rng);
    const auto s = sample_flow(*m, p, 1000, rng);
    double worst = 0;
    std::vector<double> u(s.dim), x(s.dim);
    for (std::size_t k = 0; k < s.size(); ++k) {
      m->inverse(p, s.point(k), u);
      m->forward(p, u, x);
      for (std::size_t i = 0; i < s.dim; ++i) {
        const double d = m->manifold_tag().front() == 'S' ? std::abs(x[i] - s.point(k)[i]) : circ_dist(x[i], s.point(k)[i]);
        worst = std::max(worst, d);
      }
    }
    rows.push_back(below(m->describe() + " f(f^-1(x))", worst, 1e-9));
  }
  return rows;
}

std::vector<CheckRow> normalization(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(seed);
  for (const auto& spec : kFamilies) {
    double worst = 0;
    for (int draw = 0; draw < 5; ++draw) {
      const double sd = spec.family == CircleFamily::Spline ? 0.4 : 1.0;
      CircleMap<double> m(spec, random_params(spec, rng, sd, true));
      const int n = 4096;
      double total = 0;
      for (int i = 0; i < n; ++i) {
        const double y = kTwoPi * i / n;  // periodic rectangle rule
        total += std::exp(-m.forward(m.inverse(y)).log_det) / kTwoPi * (kTwoPi / n);
      }
      worst = std::max(worst, std::abs(total - 1));
    }
    rows.push_back(below(label(spec) + " S1 integral", worst, 1e-4));
  }
  {
    TorusFlowSpec ts;
    ts.circle = {CircleFamily::Mobius, 2, {}};
    ts.hidden = {16, 16};
    ts.output_scale = 0.3;
    ts.init_jitter = 0.3;
    const TorusFlow flow(ts);
    std::vector<double> p(flow.param_count());
    flow.init_params(p, rng);
    const int n = 512;
    const double h = kTwoPi / n;
    double total = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x[2] = {i * h, j * h};
        total += std::exp(flow.log_prob(p, x)) * h * h;
      }
    rows.push_back(below("T2 coupling flow integral", std::abs(total - 1), 1e-3));
  }
  {
    RecursiveSphereSpec rs;
    rs.height_K = 8;
    rs.circle = {CircleFamily::Mobius, 3, {}};
    rs.hidden = {16};
    rs.output_scale = 0.3;
    rs.init_jitter = 0.3;
    ExpMapSpec es;
    es.passes = 3;
    es.K = 2;
    es.init_slack = 0.0;
    es.init_scale = 1.0;
    const RecursiveSphereFlow rf(rs);
    const ExpMapFlow ef(es);
    for (const FlowModel* m : {static_cast<const FlowModel*>(&rf), static_cast<const FlowModel*>(&ef)}) {
      std::vector<double> p(m->param_count());
      m->init_params(p, rng);
      const int nlon = 400, nlat = 200;
      const double dl = kTwoPi / nlon, dc = kPi / nlat;
      double total = 0;
      for (int j = 0; j < nlat; ++j) {
        const double c = (j + 0.5) * dc;
        for (int i = 0; i < nlon; ++i) {
          const double x[3] = {std::sin(c) * std::cos(i * dl), std::sin(c) * std::sin(i * dl), std::cos(c)};
          total += std::exp(m->log_prob(p, x)) * std::sin(c) * dl * dc;
        }
      }
      rows.push_back(below(m->describe() + " S2 integral", std::abs(total - 1), 1e-2));
    }
  }
  return rows;
}

std::vector<CheckRow> gradcheck(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(seed);
  {
    // primitives against central differences
    using U = std::function<Var(const Var&)>;
    using F = std::function<double(double)>;
    struct Prim {
      const char* name;
      U v;
      F f;
      double lo, hi;
    };
    const Prim prims[] = {
        {"sin", [](const Var& a) { return diff::sin(a); }, [](double a) { return std::sin(a); }, -3, 3},
        {"cos", [](const Var& a) { return diff::cos(a); }, [](double a) { return std::cos(a); }, -3, 3},
        {"tan", [](const Var& a) { return diff::tan(a); }, [](double a) { return std::tan(a); }, -1.2, 1.2},
        {"atan", [](const Var& a) { return diff::atan(a); }, [](double a) { return std::atan(a); }, -3, 3},
        {"exp", [](const Var& a) { return diff::exp(a); }, [](double a) { return std::exp(a); }, -3, 3},
        {"log", [](const Var& a) { return diff::log(a); }, [](double a) { return std::log(a); }, 0.1, 5},
        {"log1p", [](const Var& a) { return diff::log1p(a); }, [](double a) { return std::log1p(a); }, -0.9, 5},
        {"sqrt", [](const Var& a) { return diff::sqrt(a); }, [](double a) { return std::sqrt(a); }, 0.1, 5},
        {"tanh", [](const Var& a) { return diff::tanh(a); }, [](double a) { return std::tanh(a); }, -3, 3},
        {"pow2.5", [](const Var& a) { return diff::pow(a, 2.5); }, [](double a) { return std::pow(a, 2.5); }, 0.1, 3},
        {"div", [](const Var& a) { return 1.0 / (a * a + 1.0); }, [](double a) { return 1.0 / (a * a + 1.0); }, -3, 3},
    };
    double worst = 0;
    for (const auto& pr : prims) {
      std::uniform_real_distribution<double> d(pr.lo, pr.hi);
      for (int k = 0; k < 200; ++k) {
        const double x = d(rng);
        diff::Tape tape;
        diff::TapeScope scope(tape);
        const Var a = tape.leaf(x);
        const auto g = tape.backward(pr.v(a));
        const double h = 1e-6;
        worst = std::max(worst, rel(g[0], (pr.f(x + h) - pr.f(x - h)) / (2 * h)));
      }
    }
    rows.push_back(below("tape primitives vs finite differences", worst, 1e-4));
  }
  TorusFlowSpec ts;
  ts.circle = {CircleFamily::Spline, 5, {}};
  ts.hidden = {16};
  ts.output_scale = 0.3;
  ts.init_jitter = 0.3;
  RecursiveSphereSpec rs;
  rs.height_K = 6;
  rs.circle = {CircleFamily::Mobius, 3, {}};
  rs.hidden = {8};
  rs.output_scale = 0.3;
  rs.init_jitter = 0.3;
  ExpMapSpec es;
  es.passes = 3;
  es.K = 2;
  es.init_slack = 0.0;
  es.init_scale = 0.5;
  const TorusFlow torus(ts);
  const RecursiveSphereFlow sphere(rs);
  const ExpMapFlow expmap(es);
  const std::pair<const FlowModel*, Target> cases[] = {
      {&torus, Target(TargetKind::T2Multimodal, 2.0)},
      {&sphere, Target(TargetKind::S2Mix4, 1.0)},
      {&expmap, Target(TargetKind::S2Mix4, 1.0)},
  };
  for (const auto& [m, t] : cases) {
    std::vector<double> p(m->param_count());
    m->init_params(p, rng);
    const std::size_t d = m->point_dim();
    std::vector<double> base(16 * d);
    for (std::size_t i = 0; i < 16; ++i) m->sample_base(rng, std::span<double>(base.data() + i * d, d));
    std::vector<double> g(p.size());
    kl_loss_and_grad(*m, p, t, base, g);
    auto plain = [&](const std::vector<double>& q) {
      double s = 0;
      std::vector<double> x(d);
      for (std::size_t i = 0; i < 16; ++i) {
        const double lq = m->forward(q, std::span<const double>(base.data() + i * d, d), x);
        s += lq + t.beta() * t.energy(x);
      }
      return s / 16;
    };
    double worst = 0;
    const std::size_t stride = std::max<std::size_t>(1, p.size() / 40);
    for (std::size_t i = 0; i < p.size(); i += stride) {
      auto q = p;
      q[i] += 1e-5;
      const double up = plain(q);
      q[i] -= 2e-5;
      worst = std::max(worst, rel(g[i], (up - plain(q)) / 2e-5));
    }
    rows.push_back(below(m->describe() + " KL-loss gradient", worst, 1e-3));
  }
  return rows;
}

std::vector<CheckRow> equivalence(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (double a : {0.1, 0.5, 0.9, 1.7, 6.0}) {
    const double centre = (1 - a) / (1 + a);
    for (int i = 0; i < 1024; ++i) {
      const double t = kTwoPi * i / 1023;
      const double mob = mobius_angle(centre, 0.0, std::cos(t), std::sin(t), t);
      worst = std::max(worst, circ_dist(ncp_single(a, 0.0, t).value, mob));
    }
  }
  rows.push_back(below("NCP(alpha, 0) == Moebius with real centre", worst, 1e-9));
  std::uniform_real_distribution<double> ua(0.2, 5.0), ub(-2.0, 2.0);
  worst = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const double a1 = ua(rng), b1 = ub(rng), a2 = ua(rng), b2 = ub(rng);
    for (int i = 0; i <= 256; ++i) {
      const double t = kTwoPi * i / 256;
      const double two = ncp_single(a1, b1, ncp_single(a2, b2, t).value).value;
      worst = std::max(worst, std::abs(two - ncp_single(a1 * a2, b1 + a1 * b2, t).value));
    }
  }
  rows.push_back(below("NCP composition law", worst, 1e-12));
  worst = 0;
  for (double r : {-0.99, -0.5, 0.0, 0.3, 0.999}) {
    double corr = 1;
    cylinder_to_sphere({{1.0, 0.0}, r}, &corr);
    worst = std::max(worst, std::abs(corr));
  }
  rows.push_back({"S2 cylinder correction is zero", worst, 0.0, worst == 0.0});
  RecursiveSphereSpec rs;
  rs.D = 3;
  rs.height_K = 8;
  rs.circle = {CircleFamily::Mobius, 3, {}};
  rs.hidden = {16};
  rs.output_scale = 0.5;
  rs.init_jitter = 0.5;
  const RecursiveSphereFlow flow(rs);
  std::vector<double> p(flow.param_count());
  int bad = 0;
  for (int draw = 0; draw < 100; ++draw) {
    flow.init_params(p, rng);
    for (double r : {1 - 1e-7, -(1 - 1e-7), 1 - 1e-3, -(1 - 1e-3)}) {
      std::vector<double> z(3);
      sample_sphere(rng, z);
      const double s = std::sqrt((1 - r) * (1 + r));
      const double x[4] = {s * z[0], s * z[1], s * z[2], r};
      bad += std::isfinite(flow.log_prob(p, x)) ? 0 : 1;
    }
  }
  rows.push_back({"S3 non-finite log densities near the poles", static_cast<double>(bad), 0.0, bad == 0});
  return rows;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"boundary", "roundtrip", "normalization", "gradcheck", "equivalence"};
  return names;
}

std::vector<CheckRow> run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "boundary") return boundary(seed);
  if (name == "roundtrip") return roundtrip(seed);
  if (name == "normalization") return normalization(seed);
  if (name == "gradcheck") return gradcheck(seed);
  if (name == "equivalence") return equivalence(seed);
  throw std::invalid_argument("unknown suite '" + name + "'");
}

}  // namespace mflow
