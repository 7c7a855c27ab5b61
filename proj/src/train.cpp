#include "mflow/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "mflow/sphere/geometry.hpp"

namespace mflow {

namespace {

/// Runs fn(b, grad_b) for every block, each into its own zeroed gradient
/// buffer, then sums losses and gradients in block order so the result does
/// not depend on scheduling.
template <class Fn>
double reduce_blocks(std::size_t n_blocks, std::span<double> grad, bool parallel, Fn&& fn) {
  const std::size_t P = grad.size();
  std::vector<double> partial(n_blocks * P, 0.0);
  std::vector<double> losses(n_blocks, 0.0);
  std::vector<std::exception_ptr> errors(n_blocks);
  auto run = [&](std::size_t b) {
    try {
      losses[b] = fn(b, std::span<double>(partial.data() + b * P, P));
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(n_blocks); ++b) run(static_cast<std::size_t>(b));
  } else {
    for (std::size_t b = 0; b < n_blocks; ++b) run(b);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  double total = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    total += losses[b];
    const double* g = partial.data() + b * P;
    for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
  }
  return total;
}

diff::Tape& block_tape() {
  static thread_local diff::Tape tape;
  tape.clear();
  return tape;
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

double log_mean_exp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("log_mean_exp of an empty sequence");
  return log_sum_exp<double>(xs) - std::log(static_cast<double>(xs.size()));
}

double ess_fraction(std::span<const double> log_w) {
  if (log_w.size() < 2) throw std::invalid_argument("ESS needs at least two weights");
  std::vector<double> twice(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) twice[i] = 2.0 * log_w[i];
  const double a = log_sum_exp<double>(log_w);
  const double b = log_sum_exp<double>(twice);
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::domain_error("ESS: weights are all zero or non-finite");
  return std::exp(2.0 * a - b) / static_cast<double>(log_w.size());
}

double kl_loss_and_grad(const FlowModel& model, std::span<const double> params, const Target& target,
                        std::span<const double> base, std::span<double> grad, int block, bool parallel) {
  const std::size_t dim = model.point_dim();
  const std::size_t n = base.size() / dim;
  const auto per = static_cast<std::size_t>(std::max(block, 1));
  const std::size_t n_blocks = (n + per - 1) / per;
  const double beta = target.beta();
  const double total = reduce_blocks(n_blocks, grad, parallel, [&](std::size_t b, std::span<double> g) {
    diff::Tape& tape = block_tape();
    diff::TapeScope scope(tape);
    const auto p = tape.leaves(params);
    std::vector<Var> x(dim);
    Var sum = 0.0;
    for (std::size_t i = b * per; i < std::min(n, (b + 1) * per); ++i) {
      const Var lq = model.forward(std::span<const Var>(p), base.subspan(i * dim, dim), std::span<Var>(x));
      sum = sum + lq + beta * target.energy<Var>(std::span<const Var>(x));
    }
    tape.backward(sum, g);
    return sum.val;
  });
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : grad) v *= inv;
  return total * inv;
}

Evaluation evaluate(const FlowModel& model, std::span<const double> params, const Target& target, std::size_t S,
                    std::mt19937_64& rng, bool parallel) {
  if (S < 2) throw std::invalid_argument("evaluation needs at least two samples");
  const std::size_t dim = model.point_dim();
  std::vector<double> base(S * dim);
  for (std::size_t i = 0; i < S; ++i) model.sample_base(rng, std::span<double>(base.data() + i * dim, dim));
  std::vector<double> terms(S);  // ln q + beta u
  std::vector<std::exception_ptr> errors(S);
  auto one = [&](std::size_t i) {
    try {
      std::vector<double> x(dim);
      const double lq = model.forward(params, std::span<const double>(base.data() + i * dim, dim), x);
      terms[i] = lq + target.beta() * target.energy(x);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(S); ++i) one(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < S; ++i) one(i);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  Evaluation ev;
  ev.samples = S;
  std::vector<double> log_w(S);
  double mean = 0.0;
  for (std::size_t i = 0; i < S; ++i) {
    log_w[i] = -terms[i];
    mean += terms[i];
  }
  mean /= static_cast<double>(S);
  double var = 0.0;
  for (double t : terms) var += (t - mean) * (t - mean);
  var /= static_cast<double>(S - 1);
  ev.loss = mean;
  ev.log_Z = log_mean_exp(log_w);
  ev.ess = ess_fraction(log_w);
  ev.kl = ev.loss + ev.log_Z;
  ev.kl_se = std::sqrt(var / static_cast<double>(S));
  return ev;
}

TrainReport kl_train(const FlowModel& model, std::vector<double>& params, const Target& target, const TrainConfig& cfg) {
  if (cfg.iterations < 0 || cfg.batch < 1 || !(cfg.lr > 0.0)) throw std::invalid_argument("bad training configuration");
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = cfg.seed;
  std::mt19937_64 rng(cfg.seed);
  diff::AdamState adam(params.size(), {cfg.lr, 0.9, 0.999, 1e-8});
  const std::size_t dim = model.point_dim();
  std::vector<double> base(static_cast<std::size_t>(cfg.batch) * dim);
  std::vector<double> grad(params.size());
  std::vector<double> last_good = params;
  report.loss_trace.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int i = 0; i < cfg.batch; ++i) {
      model.sample_base(rng, std::span<double>(base.data() + static_cast<std::size_t>(i) * dim, dim));
    }
    double loss = 0.0;
    try {
      loss = kl_loss_and_grad(model, params, target, base, grad, cfg.block, cfg.parallel);
    } catch (const DiffError& e) {
      throw TrainAbort(it, last_good, e.what());
    }
    if (!std::isfinite(loss) || !all_finite(grad)) throw TrainAbort(it, last_good, "non-finite loss");
    report.loss_trace.push_back(loss);
    if (cfg.on_iteration) cfg.on_iteration(it, loss);
    last_good = params;
    diff::adam_step(adam, params, grad);
  }
  std::mt19937_64 eval_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  report.eval = evaluate(model, params, target, static_cast<std::size_t>(cfg.eval_samples), eval_rng, cfg.parallel);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Dataset vmf_dataset(double kappa, std::span<const double> mu, std::size_t n, std::mt19937_64& rng) {
  if (mu.size() != 3 || !(kappa > 0.0)) throw std::invalid_argument("vmf_dataset: needs kappa > 0 and mu in R^3");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Dataset d;
  d.dim = 3;
  d.points.reserve(n * 3);
  // tangent frame at mu
  const std::vector<double> m(mu.begin(), mu.end());
  const std::vector<double> E = tangent_basis<double>(m);
  for (std::size_t k = 0; k < n; ++k) {
    // inverse CDF of the height w = x . mu
    const double u = uni(rng);
    const double w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
    const double phi = kTwoPi * uni(rng);
    const double s = std::sqrt(std::max(0.0, (1.0 - w) * (1.0 + w)));
    for (std::size_t i = 0; i < 3; ++i) {
      d.points.push_back(w * m[i] + s * (std::cos(phi) * E[i] + std::sin(phi) * E[3 + i]));
    }
  }
  return d;
}

void check_on_manifold(const FlowModel& model, const Dataset& data) {
  if (data.dim != model.point_dim()) throw DomainError("dataset dimension does not match the model");
  const bool sphere = model.manifold_tag().front() == 'S';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.point(i);
    if (!all_finite(x)) throw DomainError("dataset row " + std::to_string(i) + " is not finite");
    if (sphere) {
      double n2 = 0.0;
      for (double v : x) n2 += v * v;
      if (std::abs(std::sqrt(n2) - 1.0) > 1e-9) throw DomainError("dataset row " + std::to_string(i) + " is off the sphere");
    }
  }
}

double nll_and_grad(const FlowModel& model, std::span<const double> params, const Dataset& data,
                    std::span<const std::size_t> rows, std::span<double> grad, int block, bool parallel) {
  const auto per = static_cast<std::size_t>(std::max(block, 1));
  const std::size_t n = rows.size();
  const std::size_t n_blocks = (n + per - 1) / per;
  const double total = reduce_blocks(n_blocks, grad, parallel, [&](std::size_t b, std::span<double> g) {
    diff::Tape& tape = block_tape();
    diff::TapeScope scope(tape);
    const auto p = tape.leaves(params);
    Var sum = 0.0;
    for (std::size_t i = b * per; i < std::min(n, (b + 1) * per); ++i) {
      sum = sum - model.log_prob(std::span<const Var>(p), data.point(rows[i]));
    }
    tape.backward(sum, g);
    return sum.val;
  });
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : grad) v *= inv;
  return total * inv;
}

TrainReport mle_train(const FlowModel& model, std::vector<double>& params, const Dataset& data, const TrainConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("maximum likelihood needs a non-empty dataset");
  check_on_manifold(model, data);
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = cfg.seed;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  diff::AdamState adam(params.size(), {cfg.lr, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> rows(static_cast<std::size_t>(cfg.batch));
  std::vector<double> grad(params.size());
  std::vector<double> last_good = params;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& r : rows) r = pick(rng);
    double loss = 0.0;
    try {
      loss = nll_and_grad(model, params, data, rows, grad, cfg.block, cfg.parallel);
    } catch (const DiffError& e) {
      throw TrainAbort(it, last_good, e.what());
    }
    if (!std::isfinite(loss) || !all_finite(grad)) throw TrainAbort(it, last_good, "non-finite loss");
    report.loss_trace.push_back(loss);
    if (cfg.on_iteration) cfg.on_iteration(it, loss);
    last_good = params;
    diff::adam_step(adam, params, grad);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace mflow
