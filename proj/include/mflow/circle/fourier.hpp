#pragma once

// Circle maps theta + sum_i (a_i / w_i) [sin(w_i theta - phi_i) + sin(phi_i)]
// with integer frequencies and sum |a_i| < 1.

#include <span>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

template <Scalar S>
struct FourierSeries {
  std::vector<int> freq;
  std::vector<S> amp, phase;
};

/// Raw layout: N amplitude parameters, N+1 mass logits (last is slack), N phases.
template <Scalar S>
FourierSeries<S> make_fourier(std::span<const S> raw, std::span<const int> freq) {
  FourierSeries<S> f;
  const std::size_t n = freq.size();
  f.freq.assign(freq.begin(), freq.end());
  const std::vector<S> mass = softmax<S>(raw.subspan(n, n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    f.amp.push_back(sm::tanh(raw[i]) * mass[i]);
    f.phase.push_back(raw[2 * n + 1 + i]);
  }
  return f;
}

template <Scalar S>
Eval<S> fourier_core(const FourierSeries<S>& f, const S& theta) {
  S value = theta;
  S slope = 1.0;
  for (std::size_t i = 0; i < f.freq.size(); ++i) {
    const double w = f.freq[i];
    const S arg = w * theta - f.phase[i];
    value += f.amp[i] / w * (sm::sin(arg) + sm::sin(f.phase[i]));
    slope += f.amp[i] * sm::cos(arg);
  }
  return {value, sm::log(slope)};
}

}  // namespace mflow
