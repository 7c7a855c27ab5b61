#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mflow/torus/coupling.hpp"

namespace mflow {

ProductManifold ProductManifold::torus(int D) {
  if (D < 1) throw std::invalid_argument("torus dimension must be at least 1");
  ProductManifold m;
  m.factors.assign(static_cast<std::size_t>(D), Factor::circle());
  return m;
}

ProductManifold ProductManifold::parse(const std::string& tag) {
  if (tag.size() >= 2 && tag[0] == 'T') {
    std::size_t used = 0;
    const int d = std::stoi(tag.substr(1), &used);
    if (used + 1 != tag.size()) throw std::invalid_argument("bad torus tag '" + tag + "'");
    return torus(d);
  }
  ProductManifold m;
  for (char c : tag) {
    if (c == 'C') m.factors.push_back(Factor::circle());
    else if (c == 'I') m.factors.push_back(Factor::interval(-1.0, 1.0));
    else throw std::invalid_argument("bad product signature '" + tag + "' (use T<D> or letters C/I)");
  }
  if (m.factors.empty()) throw std::invalid_argument("empty product signature");
  return m;
}

bool ProductManifold::is_torus() const {
  for (const auto& f : factors) {
    if (!f.is_circle()) return false;
  }
  return true;
}

std::string ProductManifold::tag() const {
  if (is_torus()) return "T" + std::to_string(factors.size());
  std::string s;
  for (const auto& f : factors) s += f.is_circle() ? 'C' : 'I';
  return s;
}

double ProductManifold::log_measure() const {
  double s = 0.0;
  for (const auto& f : factors) s += std::log(f.measure());
  return s;
}

std::size_t ProductManifold::embed_dim(const std::vector<int>& idx) const {
  std::size_t n = 0;
  for (int i : idx) n += factors[i].is_circle() ? 2 : 1;
  return n;
}

TorusFlow::TorusFlow(TorusFlowSpec spec) : spec_(std::move(spec)) {
  const int D = static_cast<int>(spec_.manifold.dim());
  if (D < 1) throw std::invalid_argument("torus flow needs at least one factor");
  if (spec_.layers < 1) throw std::invalid_argument("torus flow needs at least one layer");
  std::size_t offset = 0;
  for (int l = 0; l < spec_.layers; ++l) {
    CouplingLayer layer;
    for (int i = 0; i < D; ++i) {
      if (D == 1 || (i + l) % 2 == 1) layer.active.push_back(i); else layer.passive.push_back(i);
    }
    for (int i : layer.active) {
      layer.raw_offset.push_back(layer.raw_count);
      layer.raw_count += transformer_params(i);
    }
    layer.conditioned = !layer.passive.empty();
    layer.param_offset = offset;
    if (layer.conditioned) {
      std::vector<int> sizes;
      sizes.push_back(static_cast<int>(spec_.manifold.embed_dim(layer.passive)));
      sizes.insert(sizes.end(), spec_.hidden.begin(), spec_.hidden.end());
      sizes.push_back(static_cast<int>(layer.raw_count));
      layer.net = diff::Mlp(sizes);
      layer.param_count = layer.net.param_count();
    } else {
      layer.param_count = layer.raw_count;
    }
    offset += layer.param_count;
    layers_.push_back(std::move(layer));
  }
  total_params_ = offset;
}

IntervalSpec TorusFlow::interval_spec(int factor) const {
  const Factor& f = spec_.manifold.factors[factor];
  return IntervalSpec{spec_.interval_K, f.a, f.b};
}

std::size_t TorusFlow::transformer_params(int factor) const {
  if (spec_.manifold.factors[factor].is_circle()) return spec_.circle.param_count();
  return interval_spec(factor).param_count();
}

std::vector<double> TorusFlow::transformer_identity(int factor) const {
  if (spec_.manifold.factors[factor].is_circle()) return spec_.circle.identity_params();
  return interval_spec(factor).identity_params();
}

std::string TorusFlow::describe() const {
  std::ostringstream os;
  os << "coupling flow on " << manifold_tag() << ": " << spec_.layers << " layers, circle transformer "
     << family_name(spec_.circle.family) << "[" << spec_.circle.K << "]";
  if (!spec_.manifold.is_torus()) os << ", interval spline[" << spec_.interval_K << "]";
  return os.str();
}

std::vector<ParamBlock> TorusFlow::layout() const {
  std::vector<ParamBlock> blocks;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    ParamBlock b;
    b.offset = layer.param_offset;
    b.size = layer.param_count;
    if (layer.conditioned) {
      b.name = "layer" + std::to_string(l) + ".conditioner";
      b.shape = layer.net.sizes();
    } else {
      b.name = "layer" + std::to_string(l) + ".free";
      b.shape = {static_cast<int>(layer.raw_count)};
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

void TorusFlow::init_params(std::span<double> params, std::mt19937_64& rng) const {
  if (params.size() != total_params_) throw DiffError(DiffError::Kind::Shape, "torus flow init: wrong length");
  std::normal_distribution<double> jitter(0.0, spec_.init_jitter);
  for (const auto& layer : layers_) {
    std::vector<double> bias;
    for (int i : layer.active) {
      auto id = transformer_identity(i);
      bias.insert(bias.end(), id.begin(), id.end());
    }
    for (auto& v : bias) v += jitter(rng);
    auto block = params.subspan(layer.param_offset, layer.param_count);
    if (layer.conditioned) {
      layer.net.init(block, rng, spec_.output_scale, bias);
    } else {
      std::copy(bias.begin(), bias.end(), block.begin());
    }
  }
}

void TorusFlow::sample_base(std::mt19937_64& rng, std::span<double> u) const {
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Factor& f = spec_.manifold.factors[i];
    u[i] = std::uniform_real_distribution<double>(f.a, f.b)(rng);
  }
}

void TorusFlow::inverse(std::span<const double> p, std::span<const double> x, std::span<double> u) const {
  std::vector<double> cur(x.begin(), x.end());
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) (void)layer_inverse<double>(*it, p, cur);
  std::copy(cur.begin(), cur.end(), u.begin());
}

}  // namespace mflow
