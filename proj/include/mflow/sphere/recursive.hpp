#pragma once

// Recursive flow on S^D: unroll the sphere into heights r_D..r_2 and a final
// angle, transform autoregressively (each height conditioned on the heights
// already transformed, the angle on all of them), then roll back up. The
// (1 - r^2) factors of the two coordinate changes are combined into stable
// log ratios so nothing is evaluated at a singularity.

#include <span>
#include <vector>

#include "mflow/circle/circle_map.hpp"
#include "mflow/diff/mlp.hpp"
#include "mflow/interval/interval_spline.hpp"
#include "mflow/model.hpp"
#include "mflow/sphere/geometry.hpp"

namespace mflow {

/// Generic driver. `Blocks` supplies, for pass p:
///   IntervalEval<S> height(p, j, cond, r)     j = 0 is r_D
///   S height_inverse(p, j, cond, y)
///   Eval<S> circle(p, cond, theta)
///   S circle_inverse(p, cond, y)
/// where cond holds the heights already transformed in that pass.
template <Scalar S, class Blocks>
S recursive_forward(int D, int passes, bool elide, const Blocks& blocks, std::span<const double> u,
                    std::span<S> x) {
  const Unrolled start = unroll_sphere(u);
  const std::size_t nh = static_cast<std::size_t>(D - 1);
  std::vector<S> h(start.heights.begin(), start.heights.end());
  S theta = start.angle;
  S log_q = -log_sphere_area(D);
  for (int p = 0; p < passes; ++p) {
    if (p > 0 && !elide) {
      // explicit T_{c->s} then T_{s->c}; their corrections cancel exactly
      std::vector<S> y(static_cast<std::size_t>(D) + 1);
      roll_sphere<S>(h, theta, y);
      std::vector<double> yv(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) yv[i] = value_of(y[i]);
      const Unrolled again = unroll_sphere(yv);
      for (std::size_t j = 0; j < nh; ++j) h[j] = h[j] + (again.heights[j] - value_of(h[j]));
      theta = theta + (again.angle - value_of(theta));
    }
    for (std::size_t j = 0; j < nh; ++j) {
      const std::span<const S> cond(h.data(), j);
      const IntervalEval<S> e = blocks.height(p, static_cast<int>(j), cond, h[j]);
      const double power = 0.5 * static_cast<double>(D - static_cast<int>(j)) - 1.0;
      log_q = log_q - e.log_det;
      if (power != 0.0) log_q = log_q + power * (e.log_ratio_lo + e.log_ratio_hi);
      h[j] = e.value;
    }
    const Eval<S> c = blocks.circle(p, std::span<const S>(h), theta);
    log_q = log_q - c.log_det;
    theta = c.value;
  }
  roll_sphere<S>(h, theta, x);
  return log_q;
}

template <Scalar S, class Blocks>
S recursive_log_prob(int D, int passes, const Blocks& blocks, std::span<const double> x, Unrolled* preimage = nullptr) {
  const Unrolled end = unroll_sphere(x);
  const std::size_t nh = static_cast<std::size_t>(D - 1);
  std::vector<S> h(end.heights.begin(), end.heights.end());
  S theta = end.angle;
  S log_q = -log_sphere_area(D);
  for (int p = passes - 1; p >= 0; --p) {
    {
      const std::span<const S> cond(h.data(), nh);
      const S prev = blocks.circle_inverse(p, cond, theta);
      log_q = log_q - blocks.circle(p, cond, prev).log_det;
      theta = prev;
    }
    for (std::size_t jj = nh; jj-- > 0;) {
      const std::span<const S> cond(h.data(), jj);
      const S prev = blocks.height_inverse(p, static_cast<int>(jj), cond, h[jj]);
      const IntervalEval<S> e = blocks.height(p, static_cast<int>(jj), cond, prev);
      const double power = 0.5 * static_cast<double>(D - static_cast<int>(jj)) - 1.0;
      log_q = log_q - e.log_det;
      if (power != 0.0) log_q = log_q + power * (e.log_ratio_lo + e.log_ratio_hi);
      h[jj] = prev;
    }
  }
  if (preimage != nullptr) {
    preimage->heights.clear();
    for (const S& v : h) preimage->heights.push_back(value_of(v));
    preimage->angle = value_of(theta);
  }
  return log_q;
}

struct RecursiveSphereSpec {
  int D = 2;
  int passes = 1;            // N_T
  int height_K = 32;         // K_s
  CircleSpec circle{CircleFamily::Mobius, 12, {}};  // K_m components
  std::vector<int> hidden = {64, 64};
  bool elide = true;
  double init_jitter = 1e-3;
  double output_scale = 1e-2;
};

class RecursiveSphereFlow final : public FlowModel {
 public:
  explicit RecursiveSphereFlow(RecursiveSphereSpec spec);

  const RecursiveSphereSpec& spec() const { return spec_; }

  std::string manifold_tag() const override { return "S" + std::to_string(spec_.D); }
  std::string describe() const override;
  std::size_t point_dim() const override { return static_cast<std::size_t>(spec_.D) + 1; }
  std::size_t param_count() const override { return total_params_; }
  std::vector<ParamBlock> layout() const override;
  void init_params(std::span<double> params, std::mt19937_64& rng) const override;

  double log_base() const override { return -log_sphere_area(spec_.D); }
  void sample_base(std::mt19937_64& rng, std::span<double> u) const override { sample_sphere(rng, u); }

  double forward(std::span<const double> p, std::span<const double> u, std::span<double> x) const override;
  Var forward(std::span<const Var> p, std::span<const double> u, std::span<Var> x) const override;
  double log_prob(std::span<const double> p, std::span<const double> x) const override;
  Var log_prob(std::span<const Var> p, std::span<const double> x) const override;
  void inverse(std::span<const double> p, std::span<const double> x, std::span<double> u) const override;

  /// Blocks view over a parameter vector, for the generic driver.
  template <Scalar S>
  struct Learned {
    const RecursiveSphereFlow& flow;
    std::span<const S> p;

    std::vector<S> block_raw(int pass, int slot, std::span<const S> cond) const;
    IntervalEval<S> height(int pass, int j, std::span<const S> cond, const S& r) const {
      const auto raw = block_raw(pass, j, cond);
      return make_interval_spline<S>(flow.height_spec(), raw).forward_full(r);
    }
    S height_inverse(int pass, int j, std::span<const S> cond, const S& y) const {
      const auto raw = block_raw(pass, j, cond);
      return make_interval_spline<S>(flow.height_spec(), raw).inverse_diff(y);
    }
    Eval<S> circle(int pass, std::span<const S> cond, const S& theta) const {
      const auto raw = block_raw(pass, flow.spec_.D - 1, cond);
      return CircleMap<S>(flow.spec_.circle, raw).forward(theta);
    }
    S circle_inverse(int pass, std::span<const S> cond, const S& y) const {
      const auto raw = block_raw(pass, flow.spec_.D - 1, cond);
      return CircleMap<S>(flow.spec_.circle, raw).inverse_diff(y);
    }
  };

  IntervalSpec height_spec() const { return IntervalSpec{spec_.height_K, -1.0, 1.0}; }

 private:
  struct Slot {
    bool conditioned = false;
    diff::Mlp net;
    std::size_t offset = 0;
    std::size_t count = 0;
    std::size_t raw_count = 0;
  };
  const Slot& slot(int pass, int j) const { return slots_[static_cast<std::size_t>(pass * spec_.D + j)]; }

  RecursiveSphereSpec spec_;
  std::vector<Slot> slots_;  // per pass: D-1 heights then the circle
  std::size_t total_params_ = 0;
};

template <Scalar S>
std::vector<S> RecursiveSphereFlow::Learned<S>::block_raw(int pass, int j, std::span<const S> cond) const {
  const Slot& s = flow.slot(pass, j);
  const auto block = p.subspan(s.offset, s.count);
  if (!s.conditioned) return std::vector<S>(block.begin(), block.end());
  return s.net.forward<S>(block, cond);
}

}  // namespace mflow
