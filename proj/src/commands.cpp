#include "mflow/io/commands.hpp"

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "mflow/errors.hpp"
#include "mflow/io/artifacts.hpp"
#include "mflow/io/config.hpp"
#include "mflow/verify.hpp"

namespace mflow {

namespace fs = std::filesystem;

fs::path default_out_root() {
  if (const char* env = std::getenv("MFLOW_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

namespace {

// Trains one replica into `dir`; returns its report or throws.
nlohmann::json train_one(const ExperimentConfig& cfg, const fs::path& dir, bool quiet, std::ostream& log) {
  fs::create_directories(dir);
  const auto model = build_model(cfg);
  std::vector<double> params(model->param_count());
  std::mt19937_64 init_rng(cfg.train.seed);
  model->init_params(params, init_rng);

  TrainConfig tc = cfg.train;
  if (!quiet) {
    const int every = std::max(1, tc.iterations / 10);
    tc.on_iteration = [&log, every, &dir](int it, double loss) {
      if (it % every == 0) log << dir.filename().string() << "  it " << it << "  loss " << loss << "\n" << std::flush;
    };
  }

  const Target target = build_target(cfg);
  TrainReport report;
  try {
    if (cfg.mode == "mle") {
      const Dataset data = build_dataset(cfg, *model);
      report = mle_train(*model, params, data, tc);
    } else {
      report = kl_train(*model, params, target, tc);
    }
  } catch (const TrainAbort& e) {
    save_snapshot(dir, cfg, *model, e.last_good_params());
    write_json(dir / "abort.json", {{"iteration", e.iteration()}, {"message", e.what()}});
    throw;
  }
  const nlohmann::json j = report_json(cfg, report, cfg.mode == "kl" ? &target : nullptr);
  write_json(dir / "report.json", j);
  write_json(dir / "meta.json", meta_json(report));
  write_loss_csv(dir / "loss.csv", report.loss_trace);
  save_snapshot(dir, cfg, *model, params);
  return j;
}

}  // namespace

int cmd_train(const TrainOptions& opt, std::ostream& log, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config);
    if (opt.seed) cfg.train.seed = *opt.seed;
    if (opt.replicas) {
      if (*opt.replicas < 1) throw ConfigError("replicas", "must be at least 1");
      cfg.replicas = *opt.replicas;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  const fs::path root = opt.out ? *opt.out : !cfg.out.empty() ? fs::path(cfg.out) : default_out_root() / cfg.name;

  try {
    if (cfg.replicas == 1) {
      train_one(cfg, root, opt.quiet, log);
      log << "wrote " << root.string() << "\n";
      return 0;
    }
    std::vector<nlohmann::json> reports;
    const std::uint64_t base = cfg.train.seed;
    for (int k = 0; k < cfg.replicas; ++k) {
      ExperimentConfig rc = cfg;
      rc.train.seed = base + static_cast<std::uint64_t>(k);
      rc.replicas = 1;
      reports.push_back(train_one(rc, root / ("replica_" + std::to_string(k)), opt.quiet, log));
    }
    write_json(root / "aggregate.json", aggregate_json(reports));
    log << "wrote " << root.string() << " (" << cfg.replicas << " replicas)\n";
    return 0;
  } catch (const TrainAbort& e) {
    err << e.what() << "; last good parameters saved\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_grid(const GridOptions& opt, std::ostream& log, std::ostream& err) {
  Snapshot s;
  try {
    s = load_snapshot(opt.snapshot);
  } catch (const ConfigError& e) {
    err << "snapshot error: " << e.what() << "\n";
    return 2;
  }
  const fs::path out = opt.out ? *opt.out : opt.snapshot;
  const std::string tag = s.model->manifold_tag();
  try {
    fs::create_directories(out);
    if (opt.resolution && *opt.resolution < 1) throw ConfigError("resolution", "must be positive");
    if (tag == "T2") {
      const int n = opt.resolution.value_or(256);
      write_torus_grid(out / "grid.csv", *s.model, s.params, n);
      log << "wrote " << (out / "grid.csv").string() << " (" << n << " x " << n << ")\n";
    } else if (tag == "S2") {
      const int nlat = opt.resolution.value_or(200);
      write_sphere_grid(out / "grid.csv", *s.model, s.params, 2 * nlat, nlat);
      log << "wrote " << (out / "grid.csv").string() << " (" << 2 * nlat << " x " << nlat << ")\n";
    } else {
      log << "no grid for manifold " << tag << "; samples only\n";
    }
    std::mt19937_64 rng(opt.seed);
    write_samples(out / "samples.csv", *s.model, s.params, opt.samples, rng);
    log << "wrote " << (out / "samples.csv").string() << " (" << opt.samples << " samples)\n";
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const EvalOptions& opt, std::ostream& log, std::ostream& err) {
  Snapshot s;
  try {
    s = load_snapshot(opt.snapshot);
  } catch (const ConfigError& e) {
    err << "snapshot error: " << e.what() << "\n";
    return 2;
  }
  if (opt.samples == 0) {
    err << "error: --samples must be positive\n";
    return 2;
  }
  try {
    const Target target = build_target(s.config);
    std::mt19937_64 rng(opt.seed);
    const Evaluation ev = evaluate(*s.model, s.params, target, opt.samples, rng);
    const nlohmann::json j = evaluation_json(ev, target.log_Z());
    write_json(opt.snapshot / "eval.json", j);
    log << j.dump(2) << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& log, std::ostream& err) {
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = suite_names();
  } else {
    bool known = false;
    for (const auto& n : suite_names()) known = known || n == suite;
    if (!known) {
      err << "unknown suite '" << suite << "'; choose from";
      for (const auto& n : suite_names()) err << " " << n;
      err << " all\n";
      return 2;
    }
    suites = {suite};
  }
  int failed = 0;
  for (const auto& name : suites) {
    log << "== " << name << "\n";
    for (const auto& row : run_suite(name, seed)) {
      log << (row.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(64) << row.check << std::right
          << std::scientific << std::setprecision(3) << std::setw(11) << row.value << "  tol "
          << row.tolerance << std::defaultfloat << "\n";
      failed += row.passed ? 0 : 1;
    }
  }
  log << (failed == 0 ? "all checks passed\n" : std::to_string(failed) + " check(s) failed\n");
  return failed == 0 ? 0 : 1;
}

}  // namespace mflow
