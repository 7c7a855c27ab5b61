#include "mflow/io/artifacts.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mflow {

using nlohmann::json;

namespace {

constexpr char kTag[8] = {'M', 'F', 'L', 'O', 'W', 'P', '0', '1'};

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_snapshot(const std::filesystem::path& dir, const ExperimentConfig& cfg, const FlowModel& model,
                   std::span<const double> params) {
  auto out = open_out(dir / "params.bin");
  out.write(kTag, sizeof kTag);
  const std::uint64_t n = params.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(n * sizeof(double)));
  json layout = json::array();
  for (const auto& b : model.layout()) {
    layout.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}, {"shape", b.shape}});
  }
  write_json(dir / "params.json", {{"config", to_json(cfg)},
                                   {"model", model.describe()},
                                   {"manifold", model.manifold_tag()},
                                   {"param_count", params.size()},
                                   {"layout", layout}});
}

Snapshot load_snapshot(const std::filesystem::path& dir) {
  std::ifstream side(dir / "params.json");
  if (!side) throw ConfigError("snapshot", "missing " + (dir / "params.json").string());
  json j;
  try {
    j = json::parse(side);
  } catch (const json::exception& e) {
    throw ConfigError("snapshot", std::string("unreadable params.json: ") + e.what());
  }
  Snapshot s;
  s.config = parse_config(j.at("config").dump());
  s.model = build_model(s.config);
  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw ConfigError("snapshot", "missing " + (dir / "params.bin").string());
  char tag[8];
  std::uint64_t n = 0;
  in.read(tag, sizeof tag);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(tag, kTag, sizeof tag) != 0) throw ConfigError("snapshot", "params.bin has a bad header");
  if (n != s.model->param_count()) throw ConfigError("snapshot", "parameter count does not match the configured model");
  s.params.resize(n);
  in.read(reinterpret_cast<char*>(s.params.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ConfigError("snapshot", "params.bin is truncated");
  return s;
}

json evaluation_json(const Evaluation& ev, std::optional<double> exact_log_Z) {
  json j = {{"log_Z", ev.log_Z},  {"ess", ev.ess},         {"loss", ev.loss},
            {"kl", ev.kl},        {"kl_se", ev.kl_se},     {"samples", ev.samples}};
  if (exact_log_Z) {
    j["log_Z_exact"] = *exact_log_Z;
    j["kl_exact_normaliser"] = ev.loss + *exact_log_Z;
  }
  return j;
}

json report_json(const ExperimentConfig& cfg, const TrainReport& r, const Target* target) {
  json j = {{"name", cfg.name},
            {"seed", r.seed},
            {"mode", cfg.mode},
            {"iterations", r.loss_trace.size()},
            {"final_loss", r.loss_trace.empty() ? 0.0 : r.loss_trace.back()}};
  if (cfg.mode == "kl") {
    j["evaluation"] = evaluation_json(r.eval, target ? target->log_Z() : std::nullopt);
    j["kl"] = r.eval.kl;
    j["ess"] = r.eval.ess;
    j["log_Z"] = r.eval.log_Z;
  }
  return j;
}

json meta_json(const TrainReport& r) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  return {{"finished_utc", ts.str()}, {"wall_seconds", r.seconds}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> trace) {
  auto out = open_out(path);
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << "," << fmt(trace[i]) << "\n";
}

json aggregate_json(const std::vector<json>& reports) {
  json out = {{"replicas", reports.size()}};
  for (const char* key : {"kl", "ess", "log_Z", "final_loss"}) {
    std::vector<double> v;
    for (const auto& r : reports)
      if (r.contains(key)) v.push_back(r.at(key).get<double>());
    if (v.empty()) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double sem = 0.0;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      sem = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    out[key] = {{"mean", mean}, {"sd_of_mean", sem}, {"values", v}};
  }
  return out;
}

void write_torus_grid(const std::filesystem::path& path, const FlowModel& model, std::span<const double> params, int n) {
  if (model.manifold_tag() != "T2") throw std::invalid_argument("torus grid export needs a T2 model");
  auto out = open_out(path);
  out << "theta1,theta2,log_q\n";
  const double h = kTwoPi / n;
  std::vector<double> row(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
      const double x[2] = {i * h, j * h};
      row[static_cast<std::size_t>(j)] = model.log_prob(params, x);
    }
    for (int j = 0; j < n; ++j) out << fmt(i * h) << "," << fmt(j * h) << "," << fmt(row[static_cast<std::size_t>(j)]) << "\n";
  }
}

void write_sphere_grid(const std::filesystem::path& path, const FlowModel& model, std::span<const double> params,
                       int nlon, int nlat) {
  if (model.manifold_tag() != "S2") throw std::invalid_argument("sphere grid export needs an S2 model");
  auto out = open_out(path);
  out << "lon,lat,x,y,z,log_q\n";
  const double dl = kTwoPi / nlon, db = kPi / nlat;
  std::vector<double> row(static_cast<std::size_t>(nlon));
  for (int j = 0; j < nlat; ++j) {
    const double lat = -0.5 * kPi + (j + 0.5) * db;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nlon; ++i) {
      const double lon = i * dl;
      const double x[3] = {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
      row[static_cast<std::size_t>(i)] = model.log_prob(params, x);
    }
    for (int i = 0; i < nlon; ++i) {
      const double lon = i * dl;
      out << fmt(lon) << "," << fmt(lat) << "," << fmt(std::cos(lat) * std::cos(lon)) << ","
          << fmt(std::cos(lat) * std::sin(lon)) << "," << fmt(std::sin(lat)) << "," << fmt(row[static_cast<std::size_t>(i)])
          << "\n";
    }
  }
}

void write_samples(const std::filesystem::path& path, const FlowModel& model, std::span<const double> params,
                   std::size_t n, std::mt19937_64& rng) {
  const Samples s = sample_flow(model, params, n, rng);
  auto out = open_out(path);
  const bool sphere = model.manifold_tag().front() == 'S';
  for (std::size_t i = 0; i < s.dim; ++i) out << (sphere ? "x" : "theta") << (i + 1) << ",";
  out << "log_q\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    for (double v : s.point(k)) out << fmt(v) << ",";
    out << fmt(s.log_q[k]) << "\n";
  }
}

}  // namespace mflow
