#pragma once

// Reverse-KL training against an unnormalised target, importance-sampled
// evaluation (ln Z, ESS, KL), and maximum likelihood on samples.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "mflow/diff/adam.hpp"
#include "mflow/model.hpp"
#include "mflow/targets.hpp"

namespace mflow {

struct TrainConfig {
  int iterations = 20000;
  int batch = 256;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  int eval_samples = 20000;
  int block = 16;         // samples per tape
  bool parallel = true;   // OpenMP over blocks; false = serial reference
  std::function<void(int iteration, double loss)> on_iteration;
};

struct Evaluation {
  double log_Z = 0.0;      // ln of the importance-sampled normaliser
  double ess = 0.0;        // fraction of the sample count, in (0, 1]
  double loss = 0.0;       // mean of ln q + beta u
  double kl = 0.0;         // loss + ln Z
  double kl_se = 0.0;      // standard error of the mean of ln q + beta u
  std::size_t samples = 0;
};

struct TrainReport {
  std::vector<double> loss_trace;
  Evaluation eval;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

/// Training stopped on a non-finite loss or gradient.
class TrainAbort : public std::runtime_error {
 public:
  TrainAbort(int iteration, std::vector<double> last_good, const std::string& why)
      : std::runtime_error("training aborted at iteration " + std::to_string(iteration) + ": " + why),
        iteration_(iteration),
        last_good_(std::move(last_good)) {}
  int iteration() const { return iteration_; }
  const std::vector<double>& last_good_params() const { return last_good_; }

 private:
  int iteration_;
  std::vector<double> last_good_;
};

/// (sum w)^2 / sum w^2 over S, from log weights.
double ess_fraction(std::span<const double> log_w);
double log_mean_exp(std::span<const double> xs);

/// Loss mean[ln q(f(u)) + beta u(f(u))] over fixed base points and its
/// gradient, split into tape blocks; `parallel` picks the OpenMP path.
double kl_loss_and_grad(const FlowModel& model, std::span<const double> params, const Target& target,
                        std::span<const double> base, std::span<double> grad, int block = 16, bool parallel = true);

/// Evaluation on S fresh samples drawn with `rng`.
Evaluation evaluate(const FlowModel& model, std::span<const double> params, const Target& target, std::size_t S,
                    std::mt19937_64& rng, bool parallel = true);

/// Trains `params` in place. Throws TrainAbort on a non-finite loss.
TrainReport kl_train(const FlowModel& model, std::vector<double>& params, const Target& target, const TrainConfig& cfg);

/// Row-major points on the model's manifold.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> points;
  std::size_t size() const { return dim == 0 ? 0 : points.size() / dim; }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

/// von Mises-Fisher samples on S^2 about the unit vector mu.
Dataset vmf_dataset(double kappa, std::span<const double> mu, std::size_t n, std::mt19937_64& rng);

/// Negative mean log-likelihood of a minibatch and its gradient.
double nll_and_grad(const FlowModel& model, std::span<const double> params, const Dataset& data,
                    std::span<const std::size_t> rows, std::span<double> grad, int block = 16, bool parallel = true);

/// Minibatch maximum likelihood; the loss trace holds the minibatch NLL.
/// Throws DomainError for samples off the manifold, std::invalid_argument
/// for an empty dataset.
TrainReport mle_train(const FlowModel& model, std::vector<double>& params, const Dataset& data, const TrainConfig& cfg);

/// Throws DomainError unless every row lies on the model's manifold.
void check_on_manifold(const FlowModel& model, const Dataset& data);

}  // namespace mflow
