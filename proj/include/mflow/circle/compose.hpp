#pragma once

#include <span>
#include <vector>

#include "mflow/circle/circle_map.hpp"

namespace mflow {

/// f = f_n o ... o f_1 over a concatenated parameter vector.
template <Scalar S>
class CircleChain {
 public:
  CircleChain(std::span<const CircleSpec> specs, std::span<const S> raw) {
    std::size_t offset = 0;
    for (const auto& spec : specs) {
      const std::size_t n = spec.param_count();
      if (offset + n > raw.size()) throw DiffError(DiffError::Kind::Shape, "circle chain: parameter vector too short");
      maps_.emplace_back(spec, raw.subspan(offset, n));
      offset += n;
    }
    if (offset != raw.size()) throw DiffError(DiffError::Kind::Shape, "circle chain: parameter vector too long");
  }

  Eval<S> forward(const S& theta) const {
    Eval<S> e{theta, S(0.0)};
    for (const auto& m : maps_) {
      const Eval<S> step = m.forward(e.value);
      e.value = step.value;
      e.log_det = e.log_det + step.log_det;
    }
    return e;
  }

  double inverse(double y) const {
    for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) y = it->inverse(y);
    return y;
  }

  std::size_t size() const { return maps_.size(); }

 private:
  std::vector<CircleMap<S>> maps_;
};

inline std::size_t chain_param_count(std::span<const CircleSpec> specs) {
  std::size_t n = 0;
  for (const auto& s : specs) n += s.param_count();
  return n;
}

}  // namespace mflow
