#pragma once

#include <random>
#include <span>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow::diff {

/// ReLU multilayer perceptron with a linear output layer. Parameters live in a
/// flat slice: for each layer, a row-major (out x in) weight block then the
/// bias vector.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);
  /// [inputs, hidden..., outputs]
  Mlp(int inputs, std::span<const int> hidden, int outputs);

  const std::vector<int>& sizes() const { return sizes_; }
  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  std::size_t param_count() const;

  /// He-uniform hidden layers; the output layer is scaled by `output_scale`
  /// and its bias set to `output_bias` (empty means zero).
  void init(std::span<double> params, std::mt19937_64& rng, double output_scale,
            std::span<const double> output_bias) const;

  template <Scalar S>
  std::vector<S> forward(std::span<const S> params, std::span<const S> input) const;

 private:
  std::vector<int> sizes_;
};

template <Scalar S>
std::vector<S> Mlp::forward(std::span<const S> params, std::span<const S> input) const {
  if (input.size() != static_cast<std::size_t>(inputs())) {
    throw DiffError(DiffError::Kind::Shape, "mlp: input length does not match layer size");
  }
  if (params.size() != param_count()) {
    throw DiffError(DiffError::Kind::Shape, "mlp: parameter slice has the wrong length");
  }
  std::vector<S> x(input.begin(), input.end());
  std::size_t offset = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto n_in = static_cast<std::size_t>(sizes_[l]);
    const auto n_out = static_cast<std::size_t>(sizes_[l + 1]);
    auto w = params.subspan(offset, n_in * n_out);
    auto b = params.subspan(offset + n_in * n_out, n_out);
    offset += n_in * n_out + n_out;
    std::vector<S> y;
    if constexpr (std::same_as<S, Var>) {
      Tape* tape = active_tape();
      if (tape != nullptr) {
        y = tape->dense(w, b, x);
      } else {
        y.resize(n_out);
        for (std::size_t o = 0; o < n_out; ++o) y[o] = diff::dot(w.subspan(o * n_in, n_in), x) + b[o];
      }
    } else {
      y.resize(n_out);
      for (std::size_t o = 0; o < n_out; ++o) {
        double acc = b[o];
        const double* row = w.data() + o * n_in;
        for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * x[j];
        y[o] = acc;
      }
    }
    if (l + 1 < layers) {
      for (auto& v : y) v = sm::relu(v);
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace mflow::diff
