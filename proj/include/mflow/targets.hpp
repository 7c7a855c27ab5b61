#pragma once

// Target densities p(x) = exp(-beta u(x)) / Z for every experiment, as
// energies u written once over double and Var (the sampling-path loss
// differentiates u through the flow's output).

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

enum class TargetKind { Uniform, T2Unimodal, T2Multimodal, T2Correlated, S2Mix4, S3Mix4, Robot6 };

std::string target_name(TargetKind k);
TargetKind parse_target(const std::string& name);

/// Manifold the target lives on ("T2", "S2", "S3", "T6"); empty for Uniform,
/// which adopts the model's manifold.
std::string target_manifold(TargetKind k);

inline constexpr std::array<double, 2> kUnimodalCentre = {4.18, 5.96};
inline constexpr std::array<std::array<double, 2>, 3> kMultimodalCentres = {{{0.21, 2.85}, {1.89, 6.18}, {3.77, 1.56}}};
inline constexpr double kCorrelatedPhase = 1.94;

inline constexpr double kSphereConcentration = 10.0;
inline constexpr std::array<std::array<double, 2>, 4> kS2Centres = {{{0.7, 1.5}, {-1.0, 1.0}, {0.6, 0.5}, {-0.7, 4.0}}};
inline constexpr std::array<std::array<double, 3>, 4> kS3Centres = {
    {{1.7, -1.5, 2.3}, {-3.0, 1.0, 3.0}, {0.6, -2.6, 4.5}, {-2.5, 3.0, 5.0}}};

inline constexpr double kLinkLength = 0.2;
inline constexpr std::array<std::array<double, 2>, 2> kTipCentres = {{{-0.5, 0.5}, {0.6, -0.1}}};
inline constexpr double kTipSpread = 0.1;

/// Spherical to Euclidean: colatitude first, longitude last,
/// (a, b) -> (sin a cos b, sin a sin b, cos a) on S^2 and
/// (a, b, c) -> (sin a sin b cos c, sin a sin b sin c, sin a cos b, cos a) on S^3.
std::vector<double> spherical_to_euclidean(std::span<const double> angles);

/// Tip position r_6 of the planar 6-link arm.
template <Scalar S>
std::array<S, 2> arm_tip(std::span<const S> theta) {
  S cum = 0.0;
  std::array<S, 2> r = {S(0.0), S(0.0)};
  for (const S& t : theta) {
    cum = cum + t;
    r[0] = r[0] + kLinkLength * sm::cos(cum);
    r[1] = r[1] + kLinkLength * sm::sin(cum);
  }
  return r;
}

class Target {
 public:
  Target(TargetKind kind, double beta, std::string uniform_manifold = "");

  TargetKind kind() const { return kind_; }
  double beta() const { return beta_; }
  const std::string& manifold() const { return manifold_; }
  std::size_t point_dim() const;

  /// ln Z of exp(-beta u) over the manifold when it has a closed form.
  std::optional<double> log_Z() const;

  template <Scalar S>
  S energy(std::span<const S> x) const;

  double energy(std::span<const double> x) const { return energy<double>(x); }
  double log_unnormalized(std::span<const double> x) const { return -beta_ * energy<double>(x); }

 private:
  TargetKind kind_;
  double beta_;
  std::string manifold_;
  std::vector<std::vector<double>> sphere_centres_;  // unit vectors
};

template <Scalar S>
S Target::energy(std::span<const S> x) const {
  switch (kind_) {
    case TargetKind::Uniform:
      return S(0.0);
    case TargetKind::T2Unimodal:
      return -(sm::cos(x[0] - kUnimodalCentre[0]) + sm::cos(x[1] - kUnimodalCentre[1]));
    case TargetKind::T2Multimodal: {
      std::array<S, 3> terms;
      for (std::size_t i = 0; i < 3; ++i) {
        terms[i] = sm::cos(x[0] - kMultimodalCentres[i][0]) + sm::cos(x[1] - kMultimodalCentres[i][1]);
      }
      return std::log(3.0) - log_sum_exp<S>(terms);
    }
    case TargetKind::T2Correlated:
      return -sm::cos(x[0] + x[1] - kCorrelatedPhase);
    case TargetKind::S2Mix4:
    case TargetKind::S3Mix4: {
      std::array<S, 4> terms;
      for (std::size_t k = 0; k < 4; ++k) {
        S d = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) d = d + x[i] * sphere_centres_[k][i];
        terms[k] = kSphereConcentration * d;
      }
      return -log_sum_exp<S>(terms);
    }
    case TargetKind::Robot6: {
      const auto tip = arm_tip<S>(x);
      std::array<S, 2> terms;
      const double var = kTipSpread * kTipSpread;
      for (std::size_t k = 0; k < 2; ++k) {
        const S dx = tip[0] - kTipCentres[k][0];
        const S dy = tip[1] - kTipCentres[k][1];
        terms[k] = -(dx * dx + dy * dy) / (2.0 * var);
      }
      // equal weights, isotropic Gaussians
      return std::log(2.0) + std::log(kTwoPi * var) - log_sum_exp<S>(terms);
    }
  }
  return S(0.0);
}

/// -log(measure): uniform base density of a manifold tag ("T2", "S3", "CCI").
double uniform_log_base(const std::string& manifold);

}  // namespace mflow
