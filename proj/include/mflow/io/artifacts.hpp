#pragma once

// Files written by the experiment runner: parameter snapshots (raw doubles
// plus a JSON sidecar), training reports, loss traces, density grids and
// sample exports. CSV columns are documented in the README.

#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "json.hpp"
#include "mflow/io/config.hpp"

namespace mflow {

/// params.bin (8-byte tag "MFLOWP01", uint64 count, little-endian doubles)
/// and params.json (config, layout, description).
void save_snapshot(const std::filesystem::path& dir, const ExperimentConfig& cfg, const FlowModel& model,
                   std::span<const double> params);

struct Snapshot {
  ExperimentConfig config;
  std::unique_ptr<FlowModel> model;
  std::vector<double> params;
};

Snapshot load_snapshot(const std::filesystem::path& dir);

nlohmann::json evaluation_json(const Evaluation& ev, std::optional<double> exact_log_Z);

/// report.json: everything reproducible from config and seed. Wall-clock
/// time goes to meta.json.
nlohmann::json report_json(const ExperimentConfig& cfg, const TrainReport& r, const Target* target);
nlohmann::json meta_json(const TrainReport& r);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_loss_csv(const std::filesystem::path& path, std::span<const double> trace);

/// Mean and standard deviation of the average over replica reports.
nlohmann::json aggregate_json(const std::vector<nlohmann::json>& reports);

/// T^2: theta1,theta2,log_q on an n x n periodic grid (radians, nats).
void write_torus_grid(const std::filesystem::path& path, const FlowModel& model, std::span<const double> params, int n);

/// S^2: lon,lat,x,y,z,log_q on an nlon x nlat grid; latitude at cell
/// midpoints in (-pi/2, pi/2), longitude in [0, 2pi).
void write_sphere_grid(const std::filesystem::path& path, const FlowModel& model, std::span<const double> params,
                       int nlon, int nlat);

/// One row per sample: coordinates then log_q.
void write_samples(const std::filesystem::path& path, const FlowModel& model, std::span<const double> params,
                   std::size_t n, std::mt19937_64& rng);

}  // namespace mflow
