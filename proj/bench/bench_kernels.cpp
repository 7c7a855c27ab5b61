// Serial reference vs OpenMP kernels: KL loss/gradient and evaluation.
// Results must agree bit for bit; timings are the median of repeats.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <random>
#include <string>
#include <vector>

#ifdef MFLOW_HAVE_OPENMP
#include <omp.h>
#endif

#include "mflow/sphere/expmap.hpp"
#include "mflow/sphere/recursive.hpp"
#include "mflow/torus/coupling.hpp"
#include "mflow/train.hpp"

using namespace mflow;

namespace {

template <class F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

void run(const std::string& name, const FlowModel& m, const Target& target, int batch, int eval_n, int repeats) {
  std::vector<double> p(m.param_count());
  std::mt19937_64 rng(1);
  m.init_params(p, rng);
  const std::size_t d = m.point_dim();
  std::vector<double> base(static_cast<std::size_t>(batch) * d);
  for (int i = 0; i < batch; ++i) m.sample_base(rng, std::span<double>(base.data() + i * d, d));

  std::vector<double> gs(p.size()), gp(p.size());
  double ls = 0, lp = 0;
  const double ts = median_seconds(repeats, [&] {
    std::fill(gs.begin(), gs.end(), 0.0);
    ls = kl_loss_and_grad(m, p, target, base, gs, 16, false);
  });
  const double tp = median_seconds(repeats, [&] {
    std::fill(gp.begin(), gp.end(), 0.0);
    lp = kl_loss_and_grad(m, p, target, base, gp, 16, true);
  });
  const bool same_grad = ls == lp && std::memcmp(gs.data(), gp.data(), gs.size() * sizeof(double)) == 0;

  Evaluation es, ep;
  const double es_t = median_seconds(repeats, [&] {
    std::mt19937_64 r(7);
    es = evaluate(m, p, target, eval_n, r, false);
  });
  const double ep_t = median_seconds(repeats, [&] {
    std::mt19937_64 r(7);
    ep = evaluate(m, p, target, eval_n, r, true);
  });
  const bool same_eval = es.log_Z == ep.log_Z && es.ess == ep.ess && es.kl == ep.kl;

  std::printf("%-28s grad  serial %8.2f ms  omp %8.2f ms  x%5.2f  %s\n", name.c_str(), ts * 1e3, tp * 1e3, ts / tp,
              same_grad ? "identical" : "MISMATCH");
  std::printf("%-28s eval  serial %8.2f ms  omp %8.2f ms  x%5.2f  %s\n", "", es_t * 1e3, ep_t * 1e3, es_t / ep_t,
              same_eval ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
#ifdef MFLOW_HAVE_OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both paths are serial\n");
#endif
  TorusFlowSpec ts;
  ts.circle = {CircleFamily::Mobius, 4, {}};
  run("T2 coupling mobius[4]", TorusFlow(ts), Target(TargetKind::T2Multimodal, 1.0), 256, 20000, repeats);
  ts.circle = {CircleFamily::Spline, 12, {}};
  run("T2 coupling cs[12]", TorusFlow(ts), Target(TargetKind::T2Multimodal, 1.0), 256, 20000, repeats);
  RecursiveSphereSpec rs;
  rs.height_K = 32;
  run("S2 recursive K_m=12 K_s=32", RecursiveSphereFlow(rs), Target(TargetKind::S2Mix4, 1.0), 256, 20000, repeats);
  ExpMapSpec es;
  es.passes = 24;
  run("S2 exp-map N_T=24 K=1", ExpMapFlow(es), Target(TargetKind::S2Mix4, 1.0), 256, 5000, repeats);
  return 0;
}
