#include "mflow/targets.hpp"

#include <cmath>
#include <stdexcept>

#include "mflow/sphere/geometry.hpp"
#include "mflow/torus/product.hpp"

namespace mflow {

namespace {
struct NamedTarget {
  TargetKind kind;
  const char* name;
  const char* manifold;
};
constexpr NamedTarget kTargets[] = {
    {TargetKind::Uniform, "uniform", ""},
    {TargetKind::T2Unimodal, "t2_unimodal", "T2"},
    {TargetKind::T2Multimodal, "t2_multimodal", "T2"},
    {TargetKind::T2Correlated, "t2_correlated", "T2"},
    {TargetKind::S2Mix4, "s2_mix4", "S2"},
    {TargetKind::S3Mix4, "s3_mix4", "S3"},
    {TargetKind::Robot6, "robot6", "T6"},
};
}  // namespace

std::string target_name(TargetKind k) {
  for (const auto& t : kTargets)
    if (t.kind == k) return t.name;
  return "unknown";
}

TargetKind parse_target(const std::string& name) {
  for (const auto& t : kTargets)
    if (name == t.name) return t.kind;
  throw std::invalid_argument("unknown target '" + name + "'");
}

std::string target_manifold(TargetKind k) {
  for (const auto& t : kTargets)
    if (t.kind == k) return t.manifold;
  return "";
}

std::vector<double> spherical_to_euclidean(std::span<const double> a) {
  if (a.size() == 2) {
    return {std::sin(a[0]) * std::cos(a[1]), std::sin(a[0]) * std::sin(a[1]), std::cos(a[0])};
  }
  if (a.size() == 3) {
    const double s = std::sin(a[0]) * std::sin(a[1]);
    return {s * std::cos(a[2]), s * std::sin(a[2]), std::sin(a[0]) * std::cos(a[1]), std::cos(a[0])};
  }
  throw std::invalid_argument("spherical_to_euclidean: expected 2 or 3 angles");
}

Target::Target(TargetKind kind, double beta, std::string uniform_manifold) : kind_(kind), beta_(beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("target beta must be positive");
  manifold_ = target_manifold(kind);
  if (kind == TargetKind::Uniform) {
    if (uniform_manifold.empty()) throw std::invalid_argument("uniform target needs a manifold");
    manifold_ = std::move(uniform_manifold);
  }
  if (kind == TargetKind::S2Mix4) {
    for (const auto& c : kS2Centres) sphere_centres_.push_back(spherical_to_euclidean(c));
  }
  if (kind == TargetKind::S3Mix4) {
    for (const auto& c : kS3Centres) sphere_centres_.push_back(spherical_to_euclidean(c));
  }
}

std::size_t Target::point_dim() const {
  if (manifold_.size() >= 2 && manifold_[0] == 'S') return static_cast<std::size_t>(std::stoi(manifold_.substr(1))) + 1;
  return ProductManifold::parse(manifold_).dim();
}

std::optional<double> Target::log_Z() const {
  const double i0 = std::log(std::cyl_bessel_i(0.0, beta_));
  switch (kind_) {
    case TargetKind::Uniform:
      return -uniform_log_base(manifold_);
    case TargetKind::T2Unimodal:
      return 2.0 * (std::log(kTwoPi) + i0);
    case TargetKind::T2Correlated:
      return 2.0 * std::log(kTwoPi) + i0;
    default:
      return std::nullopt;
  }
}

double uniform_log_base(const std::string& manifold) {
  if (manifold.size() >= 2 && manifold[0] == 'S') return -log_sphere_area(std::stoi(manifold.substr(1)));
  return -ProductManifold::parse(manifold).log_measure();
}

}  // namespace mflow
