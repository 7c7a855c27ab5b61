#pragma once

// Experiment configuration: a JSON document with a fixed schema. Unknown
// keys and wrong types are rejected with the offending key path.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mflow/model.hpp"
#include "mflow/targets.hpp"
#include "mflow/train.hpp"

namespace mflow {

struct FlowConfig {
  std::string type;  // "coupling" | "recursive" | "expmap"
  // coupling (tori and products)
  int layers = 2;
  std::string circle = "mobius";
  int K = 1;  // circle components (coupling), radial components (expmap)
  int interval_K = 8;
  std::vector<int> frequencies;  // fourier circles
  std::vector<int> hidden = {64, 64};
  // recursive sphere
  int N_T = 1;
  int K_m = 12;
  int K_s = 32;
  bool elide = true;
  // exp-map
  std::string field = "radial";
  double init_slack = 3.0;
  double init_scale = 1e-2;
  // shared initialisation
  double init_jitter = 1e-3;
  double output_scale = 1e-2;
};

struct DataConfig {
  std::string source;  // "vmf" | "csv"
  double kappa = 10.0;
  std::vector<double> mu = {0.0, 0.0, 1.0};
  int n = 20000;
  std::string path;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string manifold;
  FlowConfig flow;
  std::string target = "uniform";
  double beta = 1.0;
  std::string mode = "kl";  // "kl" | "mle"
  TrainConfig train;
  std::optional<DataConfig> data;
  int replicas = 1;
  std::string out;
};

/// Parses and validates; throws ConfigError naming the key path, or with a
/// line and column for malformed JSON.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

std::unique_ptr<FlowModel> build_model(const ExperimentConfig& cfg);
Target build_target(const ExperimentConfig& cfg);
Dataset build_dataset(const ExperimentConfig& cfg, const FlowModel& model);

}  // namespace mflow
