#include "commands.hpp"

#include <algorithm>
#include <iostream>

#include "pmwb/blocking.hpp"
#include "pmwb/cegpmi.hpp"
#include "pmwb/charmap.hpp"
#include "pmwb/eval.hpp"
#include "pmwb/io.hpp"

namespace pmwb::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int guarded(Streams io, const std::function<int()>& body) {
  try {
    return body();
  } catch (const CegpmiAborted& e) {
    io.err << "error: " << e.what() << "\n";
    return kBackend;
  } catch (const ModelViolation& e) {
    io.err << "error: model violation: " << e.what() << "\n";
    return kNegative;
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const FormatError& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const IoError& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const UnknownInstruction& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const ScopeMismatch& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const EncodingError& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const KTooLarge& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    io.err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    // Solver, backend and anything unexpected.
    io.err << "error: " << e.what() << "\n";
    return kBackend;
  }
  return kUsage;
}

namespace {

PortMapping ground_truth(const WorkbenchConfig& cfg) {
  if (!cfg.mapping) throw ConfigError("no ground-truth mapping configured (set 'mapping' in the config file)");
  return load_mapping(*cfg.mapping);
}

fs::path output_dir(const WorkbenchConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir.string() + "': " + ec.message());
  return cfg.out_dir;
}

void check_known(const PortMapping& m, const Experiment& e) {
  for (const auto& [id, _] : e.counts())
    if (!m.contains(id)) throw UnknownInstruction(id);
}

}  // namespace

int cmd_simulate(const WorkbenchConfig& cfg, const fs::path& experiments, Streams io) {
  const PortMapping truth = ground_truth(cfg);
  const auto exps = load_experiments(experiments);
  for (const auto& e : exps) check_known(truth, e);
  SimulatedBackend backend(truth, cfg.sim);
  MeasurementLog log;
  for (const auto& e : exps) {
    log.push_back(measure(backend, e, cfg.measure));
    io.out << (e.empty() ? "{}" : e.key()) << " " << format_fixed(log.back().cycles) << " " << log.back().uops << "\n";
  }
  log_save(log, output_dir(cfg) / "measurements.jsonl");
  return kOk;
}

int cmd_infer(const WorkbenchConfig& cfg, bool resume, Streams io) {
  const PortMapping truth = ground_truth(cfg);
  const fs::path out = output_dir(cfg);
  SimulatedBackend backend(truth, cfg.sim);
  Harness harness(backend, cfg.measure);
  const auto insns = truth.ids();

  const auto candidates = find_candidates(insns, harness);
  if (candidates.empty()) {
    io.err << "error: no blocking candidates\n";
    return kNegative;
  }
  const BlockingReport blocking = select_representatives(candidates, harness);
  json excluded = json::array();
  for (const auto& x : blocking.excluded) excluded.push_back({{"id", x.id}, {"reason", x.reason}});
  write_json_file(out / "blocking.json",
                  {{"classes", blocking_classes_to_json(blocking.classes)}, {"excluded", excluded}});
  if (blocking.classes.empty()) {
    io.err << "error: no blocking candidates with an integral port count\n";
    return kNegative;
  }

  SolverConfig solver = cfg.solver;
  if (solver.n_ports == 0) solver.n_ports = truth.n_ports();
  std::vector<std::string> core_insns;
  for (const auto& c : blocking.classes) {
    solver.port_counts[c.representative] = c.port_count;
    core_insns.push_back(c.representative);
  }
  std::vector<std::string> improper_ids;
  for (const auto& blocker : solver.improper_blockers) {
    if (!truth.contains(blocker.id)) throw ConfigError("improper blocker '" + blocker.id + "' is not in the mapping");
    if (!solver.port_counts.count(blocker.shared_with))
      throw ConfigError("improper blocker '" + blocker.id + "' shares '" + blocker.shared_with +
                        "', which is not a blocking-class representative");
    improper_ids.push_back(blocker.id);
    core_insns.push_back(blocker.id);
  }

  CegpmiOptions options;
  options.transcript_path = out / "transcript.jsonl";
  options.state_path = out / "state.json";
  options.smt_log_path = out / "solver.smt2";
  std::optional<CegpmiState> previous;
  if (resume) {
    if (!fs::exists(*options.state_path))
      throw ConfigError("nothing to resume: '" + options.state_path->string() + "' does not exist");
    previous = state_from_json(read_json_file(*options.state_path));
  }

  CegpmiResult core;
  try {
    core = run_cegpmi(core_insns, harness, solver, options, previous);
  } catch (const CegpmiAborted& e) {
    log_save(harness.log(), out / "measurements.jsonl");
    io.err << "inference state saved to " << options.state_path->string() << "\n";
    throw;
  }
  if (!core.mapping) {
    log_save(harness.log(), out / "measurements.jsonl");
    io.err << "error: the observations do not fit the port mapping model\n";
    return kNegative;
  }
  save_mapping(out / "core_mapping.json", *core.mapping);

  const auto suite = BlockingSuite::from_core_mapping(*core.mapping, improper_ids);
  const auto report = characterize_all(insns, suite, harness, cfg.charmap);
  write_json_file(out / "characterization.json", report_to_json(report));
  save_mapping(out / "mapping.json", report_mapping(report, solver.n_ports));
  log_save(harness.log(), out / "measurements.jsonl");

  std::size_t partial = std::count_if(report.results.begin(), report.results.end(),
                                      [](const auto& r) { return r.second.partial; });
  io.out << "blocking classes: " << blocking.classes.size() << "\n"
         << "core inference: " << core.state.iterations << " solver rounds, " << core.state.exps.size()
         << " experiments\n"
         << "characterized: " << report.results.size() << " (" << partial << " partial), excluded: "
         << report.excluded.size() << "\n"
         << "mapping written to " << (out / "mapping.json").string() << "\n";
  return kOk;
}

int cmd_eval(const WorkbenchConfig& cfg, const fs::path& inferred_path, const std::optional<fs::path>& truth_path,
             Streams io) {
  const PortMapping inferred = load_mapping(inferred_path);
  const PortMapping truth = truth_path ? load_mapping(*truth_path) : ground_truth(cfg);
  if (inferred.ids() != truth.ids())
    throw ScopeMismatch("inferred and ground-truth mappings cover different instructions");
  const fs::path out = output_dir(cfg);

  const auto blocks = gen_random_blocks(truth.ids(), cfg.eval.blocks, cfg.eval.block_size, cfg.seed);
  SimulatedBackend backend(truth, cfg.sim);
  Harness harness(backend, cfg.measure);
  const auto samples = collect_ipc(inferred, harness, blocks, cfg.sim.r_max, cfg.eval.clip);
  const auto report = metrics(samples.predicted, samples.measured);
  const json j = accuracy_to_json(report);
  write_json_file(out / "accuracy.json", j);
  heatmap_export(samples.predicted, samples.measured, cfg.eval.bucket_width, out / "heatmap.csv");
  io.out << j.dump() << "\n";
  return kOk;
}

int cmd_verify(const fs::path& a, const fs::path& b, std::uint32_t max_size, const std::optional<Rational>& r_max,
               double epsilon, Streams io) {
  const PortMapping ma = load_mapping(a);
  const PortMapping mb = load_mapping(b);
  auto witness = observational_equivalence(ma, mb, r_max, max_size, epsilon);
  if (!witness) return kOk;
  io.out << counts_to_json(*witness).dump() << "\n";
  return kNegative;
}

int cmd_gen_mapping(const GenMappingOptions& opts, std::uint64_t seed, const std::optional<fs::path>& output,
                    Streams io) {
  const PortMapping m = opts.blockable ? gen_blockable_mapping(opts.insns, opts.ports, opts.max_uops, seed).mapping
                                       : gen_random_mapping(opts.insns, opts.ports, opts.max_uops, seed);
  if (output)
    save_mapping(*output, m);
  else
    io.out << mapping_to_json(m).dump(2) << "\n";
  return kOk;
}

int cmd_gen_blocks(const fs::path& mapping, std::size_t count, std::uint32_t size, std::uint64_t seed,
                   const std::optional<fs::path>& output, Streams io) {
  const auto blocks = gen_random_blocks(load_mapping(mapping).ids(), count, size, seed);
  if (output)
    save_experiments(*output, blocks);
  else
    io.out << experiments_to_json(blocks).dump(2) << "\n";
  return kOk;
}

}  // namespace pmwb::cli
