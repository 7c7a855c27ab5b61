// Command-line front end: train, grid, eval, verify.

#include <iostream>

#include "CLI11.hpp"
#include "mflow/io/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Normalizing flows on circles, tori and spheres"};
  app.require_subcommand(1);

  mflow::TrainOptions train;
  std::uint64_t train_seed = 0;
  int replicas = 1;
  std::string train_out;
  auto* t = app.add_subcommand("train", "train a flow from a JSON config");
  t->add_option("--config", train.config, "experiment config")->required()->check(CLI::ExistingFile);
  auto* t_seed = t->add_option("--seed", train_seed, "override train.seed");
  auto* t_rep = t->add_option("--replicas", replicas, "override replica count");
  auto* t_out = t->add_option("--out", train_out, "output directory (default $MFLOW_OUT/<name>)");
  t->add_flag("--quiet", train.quiet, "no progress lines");

  mflow::GridOptions grid;
  int resolution = 0;
  std::string grid_out;
  auto* g = app.add_subcommand("grid", "export a log-density grid and samples from a snapshot");
  g->add_option("--snapshot", grid.snapshot, "directory holding params.json/params.bin")->required();
  auto* g_res = g->add_option("--resolution", resolution, "T2: n x n (256), S2: 2n x n (200)");
  g->add_option("--samples", grid.samples, "samples to export")->capture_default_str();
  g->add_option("--seed", grid.seed, "sampling seed")->capture_default_str();
  auto* g_out = g->add_option("--out", grid_out, "output directory (default: the snapshot)");

  mflow::EvalOptions ev;
  auto* e = app.add_subcommand("eval", "importance-sampled ln Z, ESS and KL of a snapshot");
  e->add_option("--snapshot", ev.snapshot, "snapshot directory")->required();
  e->add_option("--samples", ev.samples, "evaluation samples")->capture_default_str();
  e->add_option("--seed", ev.seed, "sampling seed")->capture_default_str();

  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  auto* v = app.add_subcommand("verify", "run the invariant suites");
  v->add_option("--suite", suite, "boundary|roundtrip|normalization|gradcheck|equivalence|all")->capture_default_str();
  v->add_option("--seed", verify_seed, "random flow seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  if (t->parsed()) {
    if (*t_seed) train.seed = train_seed;
    if (*t_rep) train.replicas = replicas;
    if (*t_out) train.out = train_out;
    return mflow::cmd_train(train, std::cout, std::cerr);
  }
  if (g->parsed()) {
    if (*g_res) grid.resolution = resolution;
    if (*g_out) grid.out = grid_out;
    return mflow::cmd_grid(grid, std::cout, std::cerr);
  }
  if (e->parsed()) return mflow::cmd_eval(ev, std::cout, std::cerr);
  return mflow::cmd_verify(suite, verify_seed, std::cout, std::cerr);
}
