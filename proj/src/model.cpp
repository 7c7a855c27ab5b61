#include "mflow/model.hpp"

namespace mflow {

Samples sample_flow(const FlowModel& model, std::span<const double> params, std::size_t n, std::mt19937_64& rng) {
  Samples s;
  s.dim = model.point_dim();
  s.points.resize(n * s.dim);
  s.log_q.resize(n);
  std::vector<double> u(s.dim);
  for (std::size_t i = 0; i < n; ++i) {
    model.sample_base(rng, u);
    s.log_q[i] = model.forward(params, u, std::span<double>(s.points.data() + i * s.dim, s.dim));
  }
  return s;
}

}  // namespace mflow
