#include <sstream>
#include <stdexcept>

#include "mflow/sphere/recursive.hpp"

namespace mflow {

RecursiveSphereFlow::RecursiveSphereFlow(RecursiveSphereSpec spec) : spec_(std::move(spec)) {
  if (spec_.D < 2) throw std::invalid_argument("recursive sphere flow needs D >= 2");
  if (spec_.passes < 1) throw std::invalid_argument("recursive sphere flow needs at least one pass");
  std::size_t offset = 0;
  for (int p = 0; p < spec_.passes; ++p) {
    for (int j = 0; j < spec_.D; ++j) {
      Slot s;
      const bool is_circle = j == spec_.D - 1;
      s.raw_count = is_circle ? spec_.circle.param_count() : height_spec().param_count();
      s.conditioned = j > 0;
      s.offset = offset;
      if (s.conditioned) {
        std::vector<int> sizes = {j};
        sizes.insert(sizes.end(), spec_.hidden.begin(), spec_.hidden.end());
        sizes.push_back(static_cast<int>(s.raw_count));
        s.net = diff::Mlp(sizes);
        s.count = s.net.param_count();
      } else {
        s.count = s.raw_count;
      }
      offset += s.count;
      slots_.push_back(std::move(s));
    }
  }
  total_params_ = offset;
}

std::string RecursiveSphereFlow::describe() const {
  std::ostringstream os;
  os << "recursive flow on S" << spec_.D << ": N_T=" << spec_.passes << ", height spline[" << spec_.height_K
     << "], circle " << family_name(spec_.circle.family) << "[" << spec_.circle.K << "]";
  return os.str();
}

std::vector<ParamBlock> RecursiveSphereFlow::layout() const {
  std::vector<ParamBlock> out;
  for (int p = 0; p < spec_.passes; ++p) {
    for (int j = 0; j < spec_.D; ++j) {
      const Slot& s = slot(p, j);
      ParamBlock b;
      const std::string what = j == spec_.D - 1 ? "circle" : "height" + std::to_string(spec_.D - j);
      b.name = "pass" + std::to_string(p) + "." + what + (s.conditioned ? ".conditioner" : ".free");
      b.offset = s.offset;
      b.size = s.count;
      b.shape = s.conditioned ? s.net.sizes() : std::vector<int>{static_cast<int>(s.raw_count)};
      out.push_back(std::move(b));
    }
  }
  return out;
}

void RecursiveSphereFlow::init_params(std::span<double> params, std::mt19937_64& rng) const {
  if (params.size() != total_params_) throw DiffError(DiffError::Kind::Shape, "sphere flow init: wrong length");
  std::normal_distribution<double> jitter(0.0, spec_.init_jitter);
  for (int p = 0; p < spec_.passes; ++p) {
    for (int j = 0; j < spec_.D; ++j) {
      const Slot& s = slot(p, j);
      std::vector<double> bias = j == spec_.D - 1 ? spec_.circle.identity_params() : height_spec().identity_params();
      for (auto& v : bias) v += jitter(rng);
      auto block = params.subspan(s.offset, s.count);
      if (s.conditioned) {
        s.net.init(block, rng, spec_.output_scale, bias);
      } else {
        std::copy(bias.begin(), bias.end(), block.begin());
      }
    }
  }
}

double RecursiveSphereFlow::forward(std::span<const double> p, std::span<const double> u, std::span<double> x) const {
  return recursive_forward<double>(spec_.D, spec_.passes, spec_.elide, Learned<double>{*this, p}, u, x);
}

Var RecursiveSphereFlow::forward(std::span<const Var> p, std::span<const double> u, std::span<Var> x) const {
  return recursive_forward<Var>(spec_.D, spec_.passes, spec_.elide, Learned<Var>{*this, p}, u, x);
}

double RecursiveSphereFlow::log_prob(std::span<const double> p, std::span<const double> x) const {
  return recursive_log_prob<double>(spec_.D, spec_.passes, Learned<double>{*this, p}, x);
}

Var RecursiveSphereFlow::log_prob(std::span<const Var> p, std::span<const double> x) const {
  return recursive_log_prob<Var>(spec_.D, spec_.passes, Learned<Var>{*this, p}, x);
}

void RecursiveSphereFlow::inverse(std::span<const double> p, std::span<const double> x, std::span<double> u) const {
  Unrolled pre;
  (void)recursive_log_prob<double>(spec_.D, spec_.passes, Learned<double>{*this, p}, x, &pre);
  roll_sphere<double>(pre.heights, pre.angle, u);
}

}  // namespace mflow
