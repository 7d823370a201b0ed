#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace pmwb::cli;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"pmwb: port mapping inference workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, solver, rmax;
  std::optional<double> epsilon;
  app.add_option("--config", config_path, "Workbench config file");
  app.add_option("--seed", seed, "Seed for generators and simulated noise");
  app.add_option("--out", out, "Output directory");
  app.add_option("--solver", solver, "SMT solver command line (default: $PMWB_SOLVER, then z3 -in)");
  app.add_option("--epsilon", epsilon, "CPI tolerance");
  app.add_option("--rmax", rmax, "Instructions-per-cycle ceiling, e.g. 4 or 9/2");

  auto* simulate = app.add_subcommand("simulate", "Measure experiments on the simulated CPU");
  fs::path experiments;
  simulate->add_option("experiments", experiments, "Experiments file")->required();

  auto* infer = app.add_subcommand("infer", "Infer a port mapping from the simulated CPU");
  bool resume = false;
  infer->add_flag("--resume", resume, "Continue core inference from <out>/state.json");

  auto* eval = app.add_subcommand("eval", "Compare an inferred mapping against the ground truth");
  fs::path inferred;
  std::optional<fs::path> truth;
  eval->add_option("inferred", inferred, "Inferred mapping")->required();
  eval->add_option("--truth", truth, "Ground-truth mapping (default: the config mapping)");

  auto* verify = app.add_subcommand("verify", "Check two mappings for observational equivalence");
  fs::path map_a, map_b;
  std::uint32_t max_size = 4;
  verify->add_option("mapping_a", map_a)->required();
  verify->add_option("mapping_b", map_b)->required();
  verify->add_option("--max-size", max_size, "Largest experiment size to enumerate")->capture_default_str();

  auto* gen_mapping = app.add_subcommand("gen-mapping", "Generate a random port mapping");
  GenMappingOptions gm;
  std::optional<fs::path> gm_output;
  gen_mapping->add_option("--insns", gm.insns)->capture_default_str()->check(CLI::PositiveNumber);
  gen_mapping->add_option("--ports", gm.ports)->capture_default_str()->check(CLI::Range(1, 16));
  gen_mapping->add_option("--max-uops", gm.max_uops)->capture_default_str()->check(CLI::PositiveNumber);
  gen_mapping->add_flag("--blockable", gm.blockable, "Add a blocking instruction for every used port set");
  gen_mapping->add_option("-o,--output", gm_output, "Output file (default: stdout)");

  auto* gen_blocks = app.add_subcommand("gen-blocks", "Generate random basic blocks");
  fs::path gb_mapping;
  std::size_t gb_count = 1000;
  std::uint32_t gb_size = 5;
  std::optional<fs::path> gb_output;
  gen_blocks->add_option("mapping", gb_mapping, "Mapping whose instructions are sampled")->required();
  gen_blocks->add_option("--count", gb_count)->capture_default_str();
  gen_blocks->add_option("--size", gb_size)->capture_default_str()->check(CLI::PositiveNumber);
  gen_blocks->add_option("-o,--output", gb_output, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  Streams io{std::cout, std::cerr};
  return guarded(io, [&]() -> int {
    WorkbenchConfig cfg = config_path ? load_config(*config_path) : WorkbenchConfig{};
    Overrides flags;
    flags.seed = seed;
    if (out) flags.out_dir = fs::path(*out);
    flags.solver = solver;
    flags.epsilon = epsilon;
    flags.r_max = rmax;
    finalize_config(cfg, flags, std::getenv("PMWB_SOLVER"));

    if (*simulate) return cmd_simulate(cfg, experiments, io);
    if (*infer) return cmd_infer(cfg, resume, io);
    if (*eval) return cmd_eval(cfg, inferred, truth, io);
    if (*verify) return cmd_verify(map_a, map_b, max_size, cfg.sim.r_max, cfg.measure.epsilon, io);
    if (*gen_mapping) return cmd_gen_mapping(gm, cfg.seed, gm_output, io);
    return cmd_gen_blocks(gb_mapping, gb_count, gb_size, cfg.seed, gb_output, io);
  });
}
