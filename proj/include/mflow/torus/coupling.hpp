#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mflow/circle/circle_map.hpp"
#include "mflow/diff/mlp.hpp"
#include "mflow/interval/interval_spline.hpp"
#include "mflow/model.hpp"
#include "mflow/torus/product.hpp"

namespace mflow {

struct TorusFlowSpec {
  ProductManifold manifold = ProductManifold::torus(2);
  CircleSpec circle;           // transformer for circle factors
  int interval_K = 8;          // spline bins for interval factors
  int layers = 2;
  std::vector<int> hidden = {64, 64};
  double init_jitter = 1e-3;
  double output_scale = 1e-2;  // multiplier on the conditioner's last-layer init
};

/// One coupling layer: transforms the coordinates in `active` conditioned on
/// the embedding of `passive`. With nothing to condition on the transformer
/// parameters are free.
struct CouplingLayer {
  std::vector<int> active;
  std::vector<int> passive;
  std::vector<std::size_t> raw_offset;  // per active factor, into the transformer block
  std::size_t raw_count = 0;
  bool conditioned = false;
  diff::Mlp net;
  std::size_t param_offset = 0;
  std::size_t param_count = 0;
};

/// Stack of coupling layers with alternating even/odd masks on a product of
/// circles and intervals. Layer l transforms coordinates i with (i + l) odd
/// (every coordinate when D = 1).
class TorusFlow final : public FlowModel {
 public:
  explicit TorusFlow(TorusFlowSpec spec);

  const TorusFlowSpec& spec() const { return spec_; }
  const std::vector<CouplingLayer>& layers() const { return layers_; }

  std::string manifold_tag() const override { return spec_.manifold.tag(); }
  std::string describe() const override;
  std::size_t point_dim() const override { return spec_.manifold.dim(); }
  std::size_t param_count() const override { return total_params_; }
  std::vector<ParamBlock> layout() const override;
  void init_params(std::span<double> params, std::mt19937_64& rng) const override;

  double log_base() const override { return -spec_.manifold.log_measure(); }
  void sample_base(std::mt19937_64& rng, std::span<double> u) const override;

  double forward(std::span<const double> p, std::span<const double> u, std::span<double> x) const override {
    return forward_impl<double>(p, u, x);
  }
  Var forward(std::span<const Var> p, std::span<const double> u, std::span<Var> x) const override {
    return forward_impl<Var>(p, u, x);
  }
  double log_prob(std::span<const double> p, std::span<const double> x) const override {
    return log_prob_impl<double>(p, x);
  }
  Var log_prob(std::span<const Var> p, std::span<const double> x) const override { return log_prob_impl<Var>(p, x); }
  void inverse(std::span<const double> p, std::span<const double> x, std::span<double> u) const override;

  /// Transformer parameters of one layer given the current point.
  template <Scalar S>
  std::vector<S> layer_raw(const CouplingLayer& layer, std::span<const S> p, std::span<const S> x) const;

  /// Applies one layer in the sampling direction; returns its log-det.
  template <Scalar S>
  S layer_forward(const CouplingLayer& layer, std::span<const S> p, std::span<S> x) const;

  /// Inverts one layer in place; returns the forward log-det at the preimage.
  template <Scalar S>
  S layer_inverse(const CouplingLayer& layer, std::span<const S> p, std::span<S> x) const;

  IntervalSpec interval_spec(int factor) const;

 private:
  template <Scalar S>
  S forward_impl(std::span<const S> p, std::span<const double> u, std::span<S> x) const;
  template <Scalar S>
  S log_prob_impl(std::span<const S> p, std::span<const double> x) const;

  std::size_t transformer_params(int factor) const;
  std::vector<double> transformer_identity(int factor) const;

  TorusFlowSpec spec_;
  std::vector<CouplingLayer> layers_;
  std::size_t total_params_ = 0;
};

template <Scalar S>
std::vector<S> TorusFlow::layer_raw(const CouplingLayer& layer, std::span<const S> p, std::span<const S> x) const {
  const auto block = p.subspan(layer.param_offset, layer.param_count);
  if (!layer.conditioned) return std::vector<S>(block.begin(), block.end());
  std::vector<S> feat;
  feat.reserve(spec_.manifold.embed_dim(layer.passive));
  for (int i : layer.passive) {
    if (spec_.manifold.factors[i].is_circle()) {
      feat.push_back(sm::cos(x[i]));
      feat.push_back(sm::sin(x[i]));
    } else {
      feat.push_back(x[i]);
    }
  }
  return layer.net.forward<S>(block, feat);
}

template <Scalar S>
S TorusFlow::layer_forward(const CouplingLayer& layer, std::span<const S> p, std::span<S> x) const {
  const std::vector<S> raw = layer_raw<S>(layer, p, std::span<const S>(x.data(), x.size()));
  S log_det = 0.0;
  for (std::size_t j = 0; j < layer.active.size(); ++j) {
    const int i = layer.active[j];
    const std::size_t n = transformer_params(i);
    const auto r = std::span<const S>(raw).subspan(layer.raw_offset[j], n);
    Eval<S> e;
    if (spec_.manifold.factors[i].is_circle()) {
      e = CircleMap<S>(spec_.circle, r).forward(x[i]);
    } else {
      e = make_interval_spline<S>(interval_spec(i), r).forward(x[i]);
    }
    x[i] = e.value;
    log_det += e.log_det;
  }
  return log_det;
}

template <Scalar S>
S TorusFlow::layer_inverse(const CouplingLayer& layer, std::span<const S> p, std::span<S> x) const {
  const std::vector<S> raw = layer_raw<S>(layer, p, std::span<const S>(x.data(), x.size()));
  S log_det = 0.0;
  for (std::size_t j = 0; j < layer.active.size(); ++j) {
    const int i = layer.active[j];
    const std::size_t n = transformer_params(i);
    const auto r = std::span<const S>(raw).subspan(layer.raw_offset[j], n);
    if (spec_.manifold.factors[i].is_circle()) {
      const CircleMap<S> m(spec_.circle, r);
      const S u = m.inverse_diff(x[i]);
      log_det += m.forward(u).log_det;
      x[i] = u;
    } else {
      const auto spline = make_interval_spline<S>(interval_spec(i), r);
      const S u = spline.inverse_diff(x[i]);
      log_det += spline.forward(u).log_det;
      x[i] = u;
    }
  }
  return log_det;
}

template <Scalar S>
S TorusFlow::forward_impl(std::span<const S> p, std::span<const double> u, std::span<S> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u[i];
  S log_det = 0.0;
  for (const auto& layer : layers_) log_det += layer_forward<S>(layer, p, x);
  return log_base() - log_det;
}

template <Scalar S>
S TorusFlow::log_prob_impl(std::span<const S> p, std::span<const double> x) const {
  std::vector<S> cur(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Factor& f = spec_.manifold.factors[i];
    if (!(x[i] >= f.a - 1e-12 && x[i] <= f.b + 1e-12) || !std::isfinite(x[i])) {
      throw DomainError("coordinate " + std::to_string(i) + " = " + std::to_string(x[i]) + " outside [" +
                        std::to_string(f.a) + ", " + std::to_string(f.b) + "]");
    }
    double v = std::clamp(x[i], f.a, f.b);
    if (f.is_circle() && v >= kTwoPi) v = 0.0;
    cur[i] = v;
  }
  S log_det = 0.0;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) log_det += layer_inverse<S>(*it, p, cur);
  return log_base() - log_det;
}

}  // namespace mflow
