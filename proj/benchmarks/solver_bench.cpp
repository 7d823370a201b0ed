#include <vector>

#include <benchmark/benchmark.h>

#include "pmwb/eval.hpp"
#include "pmwb/smt.hpp"
#include "pmwb/solver.hpp"
#include "pmwb/vcpu.hpp"

namespace {

pmwb::SolverConfig config_for(const pmwb::PortMapping& truth) {
  pmwb::SolverConfig cfg;
  cfg.n_ports = truth.n_ports();
  cfg.solver_command = PMWB_BENCH_SOLVER;
  for (const auto& [id, insn] : truth.instructions()) cfg.port_counts[id] = insn.usage.entries().front().ports.size();
  return cfg;
}

/// find_mapping over every experiment of size <= 2 for a random single-μop truth.
void bm_find_mapping(benchmark::State& state) {
  const auto truth = pmwb::gen_random_mapping(static_cast<unsigned>(state.range(0)), 4, 1, 5);
  const auto cfg = config_for(truth);
  std::vector<pmwb::Observation> exps;
  pmwb::for_each_experiment(truth.ids(), 2, [&](const pmwb::Experiment& e) {
    exps.push_back({e, pmwb::to_double(pmwb::bottleneck_throughput(truth, e))});
    return true;
  });
  pmwb::smt::Session session(cfg.session_options());
  for (auto _ : state) benchmark::DoNotOptimize(pmwb::find_mapping(exps, cfg, session));
}
BENCHMARK(bm_find_mapping)->DenseRange(2, 6, 2)->Unit(benchmark::kMillisecond);

}  // namespace
