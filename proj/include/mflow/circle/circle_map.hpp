#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "mflow/circle/bisect.hpp"
#include "mflow/circle/circular_spline.hpp"
#include "mflow/circle/fourier.hpp"
#include "mflow/circle/mobius.hpp"
#include "mflow/circle/ncp.hpp"

namespace mflow {

enum class CircleFamily { Mobius, Spline, Ncp, Fourier };

const char* family_name(CircleFamily f);
CircleFamily parse_family(const std::string& name);  // throws std::invalid_argument

/// Shape of one circle transformer. Every family ends its raw parameter block
/// with a global phase.
struct CircleSpec {
  CircleFamily family = CircleFamily::Mobius;
  int K = 1;
  std::vector<int> frequencies;  // Fourier only

  std::size_t param_count() const;
  std::vector<double> identity_params() const;
  bool analytic_inverse() const;
};

/// Gaussian draw of raw parameters (scale `sd`), phase zeroed unless `with_phase`.
std::vector<double> random_params(const CircleSpec& spec, std::mt19937_64& rng, double sd = 1.0,
                                  bool with_phase = false);

/// A circle diffeomorphism with constrained parameters. `core` is the map
/// fixing 0 and 2pi; `forward` appends the phase translation mod 2pi.
template <Scalar S>
class CircleMap {
 public:
  CircleMap(const CircleSpec& spec, std::span<const S> raw);

  const CircleSpec& spec() const { return spec_; }
  const S& phase() const { return phase_; }

  Eval<S> core(const S& theta) const;
  Eval<S> forward(const S& theta) const;

  /// Preimage of y under forward, in [0, 2pi).
  double inverse(double y) const;
  double core_inverse(double y) const;

  /// Preimage carrying derivatives with respect to y and the parameters,
  /// through one implicit-function step at the located root.
  S inverse_diff(const S& y) const;

 private:
  CircleSpec spec_;
  std::vector<double> raw_values_;  // kept only for recorded maps
  S phase_;
  MobiusMix<S> mobius_;
  RqSpline<S> spline_;
  NcpMix<S> ncp_;
  FourierSeries<S> fourier_;
};

template <Scalar S>
CircleMap<S>::CircleMap(const CircleSpec& spec, std::span<const S> raw) : spec_(spec) {
  if (raw.size() != spec.param_count()) {
    throw DiffError(DiffError::Kind::Shape, std::string("circle flow (") + family_name(spec.family) + "): expected " +
                                                std::to_string(spec.param_count()) + " parameters, got " +
                                                std::to_string(raw.size()));
  }
  if constexpr (!std::same_as<S, double>) {
    raw_values_.reserve(raw.size());
    for (const S& r : raw) raw_values_.push_back(value_of(r));
  }
  phase_ = raw.back();
  const auto body = raw.first(raw.size() - 1);
  switch (spec.family) {
    case CircleFamily::Mobius: mobius_ = make_mobius<S>(body, spec.K); break;
    case CircleFamily::Spline: spline_ = make_circular_spline<S>(body, spec.K); break;
    case CircleFamily::Ncp: ncp_ = make_ncp<S>(body, spec.K); break;
    case CircleFamily::Fourier: fourier_ = make_fourier<S>(body, spec.frequencies); break;
  }
}

template <Scalar S>
Eval<S> CircleMap<S>::core(const S& theta) const {
  switch (spec_.family) {
    case CircleFamily::Mobius: return mobius_core(mobius_, theta);
    case CircleFamily::Spline: return spline_.forward(theta);
    case CircleFamily::Ncp: return ncp_core(ncp_, theta);
    case CircleFamily::Fourier: return fourier_core(fourier_, theta);
  }
  return {theta, S(0.0)};
}

template <Scalar S>
Eval<S> CircleMap<S>::forward(const S& theta) const {
  Eval<S> e = core(theta);
  e.value = wrap_angle(e.value + phase_);
  return e;
}

template <Scalar S>
double CircleMap<S>::core_inverse(double y) const {
  if (spec_.family == CircleFamily::Spline) return spline_.inverse(y);
  if (spec_.family == CircleFamily::Ncp && spec_.K == 1) {
    // group inverse (1/a, -b/a)
    const double a = value_of(ncp_.alpha[0]);
    const double b = value_of(ncp_.beta[0]);
    return value_of(ncp_single(1.0 / a, -b / a, y).value);
  }
  if constexpr (std::same_as<S, double>) {
    return bisect_increasing([this](double t) { return core(t).value; }, y, 0.0, kTwoPi);
  } else {
    // search on a plain-valued copy so nothing is recorded
    return CircleMap<double>(spec_, raw_values_).core_inverse(y);
  }
}

template <Scalar S>
double CircleMap<S>::inverse(double y) const {
  const double shifted = value_of(wrap_angle(y - value_of(phase_)));
  const double x = core_inverse(shifted);
  return x >= kTwoPi ? 0.0 : x;
}

template <Scalar S>
S CircleMap<S>::inverse_diff(const S& y) const {
  if constexpr (std::same_as<S, double>) {
    return inverse(y);
  } else {
    const double yv = value_of(y);
    const double raw_shift = yv - value_of(phase_);
    const double wrapped = value_of(wrap_angle(raw_shift));
    const double x0 = core_inverse(wrapped);
    const S target = y - phase_ - (raw_shift - wrapped);
    const Eval<S> at = core(S(x0));
    const double slope = std::exp(value_of(at.log_det));
    // core(x0) carries parameter dependence; x0 itself is held fixed
    S x = x0 - (at.value - target) / slope;
    if (value_of(x) >= kTwoPi) x = x - kTwoPi;
    return x;
  }
}

}  // namespace mflow
