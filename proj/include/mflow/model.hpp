#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "mflow/scalar.hpp"

namespace mflow {

/// A named contiguous slice of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::vector<int> shape;  // e.g. MLP layer sizes; empty for plain vectors
};

/// Common surface of every flow: the base distribution, the sampling map
/// u -> x = f(u) with its density, and the density of arbitrary points
/// through the inverse. Recorded overloads allow gradients with respect to
/// the parameters.
class FlowModel {
 public:
  virtual ~FlowModel() = default;

  /// "T2", "T6", "S2", "S3", or a product signature such as "CCI".
  virtual std::string manifold_tag() const = 0;
  virtual std::string describe() const = 0;

  /// Coordinates per point: angles/heights on products, D+1 on spheres.
  virtual std::size_t point_dim() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual std::vector<ParamBlock> layout() const = 0;
  virtual void init_params(std::span<double> params, std::mt19937_64& rng) const = 0;

  virtual double log_base() const = 0;
  virtual void sample_base(std::mt19937_64& rng, std::span<double> u) const = 0;

  /// x = f(u); returns log q(x).
  virtual double forward(std::span<const double> params, std::span<const double> u, std::span<double> x) const = 0;
  virtual Var forward(std::span<const Var> params, std::span<const double> u, std::span<Var> x) const = 0;

  /// log q(x) via the inverse map.
  virtual double log_prob(std::span<const double> params, std::span<const double> x) const = 0;
  virtual Var log_prob(std::span<const Var> params, std::span<const double> x) const = 0;

  /// u = f^{-1}(x).
  virtual void inverse(std::span<const double> params, std::span<const double> x, std::span<double> u) const = 0;
};

}  // namespace mflow

namespace mflow {

/// n points drawn through the flow, row-major (n x point_dim), with log q.
struct Samples {
  std::size_t dim = 0;
  std::vector<double> points;
  std::vector<double> log_q;

  std::size_t size() const { return log_q.size(); }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

Samples sample_flow(const FlowModel& model, std::span<const double> params, std::size_t n, std::mt19937_64& rng);

}  // namespace mflow
