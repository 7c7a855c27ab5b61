#include "mflow/circle/circle_map.hpp"

#include <stdexcept>

namespace mflow {

const char* family_name(CircleFamily f) {
  switch (f) {
    case CircleFamily::Mobius: return "mobius";
    case CircleFamily::Spline: return "cs";
    case CircleFamily::Ncp: return "ncp";
    case CircleFamily::Fourier: return "fourier";
  }
  return "unknown";
}

CircleFamily parse_family(const std::string& name) {
  if (name == "mobius") return CircleFamily::Mobius;
  if (name == "cs" || name == "spline") return CircleFamily::Spline;
  if (name == "ncp") return CircleFamily::Ncp;
  if (name == "fourier") return CircleFamily::Fourier;
  throw std::invalid_argument("unknown circle family '" + name + "' (expected mobius, cs, ncp or fourier)");
}

std::size_t CircleSpec::param_count() const {
  const auto k = static_cast<std::size_t>(K);
  switch (family) {
    case CircleFamily::Mobius: return 3 * k + 1;
    case CircleFamily::Spline: return 3 * k + 1;
    case CircleFamily::Ncp: return 3 * k + 1;
    case CircleFamily::Fourier: return 3 * frequencies.size() + 2;
  }
  return 0;
}

std::vector<double> CircleSpec::identity_params() const {
  std::vector<double> p(param_count(), 0.0);
  const auto k = static_cast<std::size_t>(K);
  switch (family) {
    case CircleFamily::Mobius:
    case CircleFamily::Fourier:
      break;
    case CircleFamily::Spline:
      for (std::size_t i = 0; i < k; ++i) p[2 * k + i] = softplus_inverse(1.0 - kMinSlope);
      break;
    case CircleFamily::Ncp:
      for (std::size_t i = 0; i < k; ++i) p[i] = softplus_inverse(1.0 - kNcpMinScale);
      break;
  }
  return p;
}

std::vector<double> random_params(const CircleSpec& spec, std::mt19937_64& rng, double sd, bool with_phase) {
  std::normal_distribution<double> n01(0.0, sd);
  std::vector<double> p(spec.param_count());
  for (auto& v : p) v = n01(rng);
  if (with_phase) {
    p.back() = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  } else {
    p.back() = 0.0;
  }
  return p;
}

bool CircleSpec::analytic_inverse() const {
  return family == CircleFamily::Spline || (family == CircleFamily::Ncp && K == 1);
}

}  // namespace mflow
