#pragma once

// Subcommand bodies behind the `mflow` executable. Each returns a process
// exit code: 0 success, 1 failed run or failed checks, 2 bad input.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace mflow {

/// Output root when neither --out nor the config names one.
std::filesystem::path default_out_root();

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas;
  std::optional<std::filesystem::path> out;
  bool quiet = false;
};

/// Writes report.json, meta.json, loss.csv and a snapshot per replica;
/// several replicas go to replica_<k>/ with seed + k and an aggregate.json.
int cmd_train(const TrainOptions& opt, std::ostream& log, std::ostream& err);

struct GridOptions {
  std::filesystem::path snapshot;
  std::optional<int> resolution;  // T2: n x n (256); S2: 2n x n (200)
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;  // defaults to the snapshot directory
};

int cmd_grid(const GridOptions& opt, std::ostream& log, std::ostream& err);

struct EvalOptions {
  std::filesystem::path snapshot;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
};

/// Importance-sampled evaluation of a snapshot; writes eval.json next to it.
int cmd_eval(const EvalOptions& opt, std::ostream& log, std::ostream& err);

/// "all" runs every suite.
int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& log, std::ostream& err);

}  // namespace mflow
