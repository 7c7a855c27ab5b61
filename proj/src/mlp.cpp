#include "mflow/diff/mlp.hpp"

#include <cmath>

namespace mflow::diff {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw DiffError(DiffError::Kind::Shape, "mlp needs at least input and output sizes");
  for (int s : sizes_) {
    if (s < 0) throw DiffError(DiffError::Kind::Shape, "mlp layer sizes must be non-negative");
  }
}

Mlp::Mlp(int inputs, std::span<const int> hidden, int outputs) {
  sizes_.push_back(inputs);
  sizes_.insert(sizes_.end(), hidden.begin(), hidden.end());
  sizes_.push_back(outputs);
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    n += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  return n;
}

void Mlp::init(std::span<double> params, std::mt19937_64& rng, double output_scale,
               std::span<const double> output_bias) const {
  if (params.size() != param_count()) throw DiffError(DiffError::Kind::Shape, "mlp init: wrong slice length");
  std::size_t offset = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto n_in = static_cast<std::size_t>(sizes_[l]);
    const auto n_out = static_cast<std::size_t>(sizes_[l + 1]);
    const bool last = l + 1 == layers;
    const double bound = n_in > 0 ? std::sqrt(6.0 / static_cast<double>(n_in)) : 0.0;
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (std::size_t k = 0; k < n_in * n_out; ++k) {
      params[offset + k] = unif(rng) * (last ? output_scale : 1.0);
    }
    for (std::size_t o = 0; o < n_out; ++o) {
      params[offset + n_in * n_out + o] = (last && !output_bias.empty()) ? output_bias[o] : 0.0;
    }
    offset += n_in * n_out + n_out;
  }
}

}  // namespace mflow::diff
