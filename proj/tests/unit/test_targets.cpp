#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mflow/targets.hpp"
#include "oracles.hpp"

using namespace mflow;

namespace {

// plain re-implementation of the four-mode sphere energy
double mix4_reference(const std::vector<std::vector<double>>& centres, const std::vector<double>& x) {
  double s = 0;
  for (const auto& c : centres) {
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d += c[i] * x[i];
    s += std::exp(10 * d);
  }
  return -std::log(s);
}

std::vector<std::vector<double>> s2_centres() {
  const double m[4][2] = {{0.7, 1.5}, {-1, 1}, {0.6, 0.5}, {-0.7, 4}};
  std::vector<std::vector<double>> out;
  for (auto& a : m) out.push_back(oracle::s2_point(a[0], a[1]));
  return out;
}

std::vector<std::vector<double>> s3_centres() {
  const double m[4][3] = {{1.7, -1.5, 2.3}, {-3.0, 1.0, 3.0}, {0.6, -2.6, 4.5}, {-2.5, 3.0, 5.0}};
  std::vector<std::vector<double>> out;
  for (auto& a : m) {
    out.push_back({std::sin(a[0]) * std::sin(a[1]) * std::cos(a[2]), std::sin(a[0]) * std::sin(a[1]) * std::sin(a[2]),
                   std::sin(a[0]) * std::cos(a[1]), std::cos(a[0])});
  }
  return out;
}

double energy(const Target& t, std::vector<double> x) { return t.energy(std::span<const double>(x)); }

}  // namespace

TEST_CASE("torus von Mises targets") {
  const Target uni(TargetKind::T2Unimodal, 1.0);
  CHECK(kUnimodalCentre[0] == 4.18);
  CHECK(kUnimodalCentre[1] == 5.96);
  CHECK(std::abs(energy(uni, {4.18, 5.96}) + 2) < 1e-15);
  CHECK(std::abs(energy(uni, {4.18 + oracle::pi, 5.96 + oracle::pi}) - 2) < 1e-14);

  const Target mix(TargetKind::T2Multimodal, 1.0);
  CHECK(energy(mix, {0.21, 2.85}) <= -std::log(std::exp(2.0) / 3) + 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(0, oracle::two_pi);
  for (int k = 0; k < 1000; ++k) {
    const double a = ang(rng), b = ang(rng);
    const double u = energy(mix, {a, b});
    CHECK(u >= -2 - 1e-12);
    CHECK(u <= 2 + 1e-12);
    // permuted component order
    double s = 0;
    for (int i : {2, 0, 1}) s += std::exp(std::cos(a - kMultimodalCentres[i][0]) + std::cos(b - kMultimodalCentres[i][1])) / 3;
    CHECK(std::abs(u + std::log(s)) < 1e-13);
  }

  const Target cor(TargetKind::T2Correlated, 1.0);
  CHECK(kCorrelatedPhase == 1.94);
  CHECK(std::abs(energy(cor, {1.0, 0.94}) + 1) < 1e-15);
  for (double d : {0.3, 1.0, -2.0}) CHECK(std::abs(energy(cor, {0.5 + d, 2.0 - d}) - energy(cor, {0.5, 2.0})) < 1e-14);
}

TEST_CASE("energies are periodic in every angle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0, oracle::two_pi);
  for (TargetKind k : {TargetKind::T2Unimodal, TargetKind::T2Multimodal, TargetKind::T2Correlated, TargetKind::Robot6}) {
    const Target t(k, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(t.point_dim());
      for (auto& v : x) v = ang(rng);
      const double u = energy(t, x);
      CHECK(std::isfinite(u));
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto y = x;
        y[i] += oracle::two_pi;
        CHECK(std::abs(energy(t, y) - u) < 1e-11);
      }
    }
  }
}

TEST_CASE("four-mode sphere targets match a scalar re-implementation") {
  const Target s2(TargetKind::S2Mix4, 1.0), s3(TargetKind::S3Mix4, 1.0);
  const auto c2 = s2_centres(), c3 = s3_centres();
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(energy(s2, c2[k]) - mix4_reference(c2, c2[k])) < 1e-9);
    CHECK(std::abs(energy(s3, c3[k]) - mix4_reference(c3, c3[k])) < 1e-9);
  }
  // the k = 1 term at its own centre is e^10
  double others = 0;
  for (std::size_t k = 1; k < 4; ++k) {
    double d = 0;
    for (int i = 0; i < 3; ++i) d += c2[k][static_cast<std::size_t>(i)] * c2[0][static_cast<std::size_t>(i)];
    others += std::exp(10 * d);
  }
  CHECK(std::abs(energy(s2, c2[0]) + std::log(std::exp(10.0) + others)) < 1e-12);
  CHECK(kS2Centres[3][1] == 4.0);
  CHECK(kS3Centres[2][2] == 4.5);
}

TEST_CASE("sphere energy is rotation covariant") {
  // rotating x and every centre together leaves u unchanged
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const auto c = s2_centres();
  const double a = 0.7, b = -1.2;
  auto rot = [&](const std::vector<double>& v) {
    std::vector<double> w = {std::cos(a) * v[0] - std::sin(a) * v[1], std::sin(a) * v[0] + std::cos(a) * v[1], v[2]};
    return std::vector<double>{w[0], std::cos(b) * w[1] - std::sin(b) * w[2], std::sin(b) * w[1] + std::cos(b) * w[2]};
  };
  std::vector<std::vector<double>> rc;
  for (const auto& v : c) rc.push_back(rot(v));
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x = {nd(rng), nd(rng), nd(rng)};
    const double n = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    for (auto& v : x) v /= n;
    CHECK(std::abs(mix4_reference(c, x) - mix4_reference(rc, rot(x))) < 1e-12);
    CHECK(std::abs(energy(Target(TargetKind::S2Mix4, 1.0), x) - mix4_reference(c, x)) < 1e-12);
  }
}

TEST_CASE("robot arm") {
  const std::vector<double> zero(6, 0.0);
  const auto tip = arm_tip<double>(zero);
  CHECK(std::abs(tip[0] - 1.2) < 1e-15);
  CHECK(std::abs(tip[1]) < 1e-15);
  CHECK(kLinkLength == 0.2);
  CHECK(kTipCentres[0][0] == -0.5);
  CHECK(kTipCentres[1][1] == -0.1);
  // closed-form energy at the straight arm
  const Target t(TargetKind::Robot6, 1.0);
  const double var = 0.01;
  const double d0 = (1.2 + 0.5) * (1.2 + 0.5) + 0.25, d1 = 0.36 + 0.01;
  const double p = 0.5 * (std::exp(-d0 / (2 * var)) + std::exp(-d1 / (2 * var))) / (2 * oracle::pi * var);
  CHECK(std::abs(energy(t, zero) + std::log(p)) < 1e-12);
}

TEST_CASE("uniform base densities") {
  CHECK(std::abs(uniform_log_base("T2") + 2 * std::log(oracle::two_pi)) < 1e-15);
  CHECK(std::abs(uniform_log_base("S2") + std::log(4 * oracle::pi)) < 1e-14);
  CHECK(std::abs(uniform_log_base("S3") + std::log(2 * oracle::pi * oracle::pi)) < 1e-14);
  CHECK(std::abs(uniform_log_base("CI") + std::log(oracle::two_pi * 2)) < 1e-14);
}

TEST_CASE("closed-form normalisers agree with quadrature") {
  for (double beta : {1.0, 4.0}) {
    for (TargetKind k : {TargetKind::T2Unimodal, TargetKind::T2Correlated}) {
      const Target t(k, beta);
      const int n = 256;
      const double h = oracle::two_pi / n;
      double z = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) z += std::exp(t.log_unnormalized(std::vector<double>{i * h, j * h})) * h * h;
      CHECK(std::abs(std::log(z) - *t.log_Z()) < 1e-10);
    }
  }
  CHECK(!Target(TargetKind::S2Mix4, 1.0).log_Z().has_value());
  CHECK_THROWS(Target(TargetKind::T2Unimodal, 0.0));
  CHECK_THROWS(parse_target("bogus"));
  CHECK(parse_target("s3_mix4") == TargetKind::S3Mix4);
}
