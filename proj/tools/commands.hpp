#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "workbench_config.hpp"

namespace pmwb::cli {

/// Process exit statuses shared by every subcommand.
enum ExitCode : int { kOk = 0, kNegative = 1, kUsage = 2, kBackend = 3 };

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

/// Runs `body`, printing any exception to io.err and mapping it to an exit
/// status: configuration and input errors 2, solver and backend failures 3,
/// model violations 1.
int guarded(Streams io, const std::function<int()>& body);

/// Measures every experiment of `experiments` on the simulated CPU and writes
/// <out>/measurements.jsonl. Prints one "key cycles uops" line per experiment.
int cmd_simulate(const WorkbenchConfig& cfg, const std::filesystem::path& experiments, Streams io);

/// Full pipeline against the simulated CPU: blocking candidates, blocking
/// classes, core inference, characterization. Writes blocking.json,
/// transcript.jsonl, state.json, core_mapping.json, characterization.json,
/// mapping.json and measurements.jsonl under <out>. With `resume` the core
/// inference continues from <out>/state.json.
int cmd_infer(const WorkbenchConfig& cfg, bool resume, Streams io);

/// Random blocks predicted with `inferred` and measured on the simulator
/// running `truth` (the config mapping when absent). Writes accuracy.json
/// and heatmap.csv under <out> and prints the accuracy report.
int cmd_eval(const WorkbenchConfig& cfg, const std::filesystem::path& inferred,
             const std::optional<std::filesystem::path>& truth, Streams io);

/// Exit 0 without output when the mappings agree on every experiment up to
/// max_size, exit 1 printing the witness otherwise, exit 2 on scope mismatch.
int cmd_verify(const std::filesystem::path& a, const std::filesystem::path& b, std::uint32_t max_size,
               const std::optional<Rational>& r_max, double epsilon, Streams io);

struct GenMappingOptions {
  unsigned insns = 6;
  unsigned ports = 4;
  unsigned max_uops = 1;
  bool blockable = false;
};

/// Writes a random mapping to `output`, or to stdout when empty.
int cmd_gen_mapping(const GenMappingOptions& opts, std::uint64_t seed, const std::optional<std::filesystem::path>& output,
                    Streams io);

/// Writes an experiments file of random blocks over the mapping's instructions.
int cmd_gen_blocks(const std::filesystem::path& mapping, std::size_t count, std::uint32_t size, std::uint64_t seed,
                   const std::optional<std::filesystem::path>& output, Streams io);

}  // namespace pmwb::cli
