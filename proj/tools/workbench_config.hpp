#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "pmwb/charmap.hpp"
#include "pmwb/errors.hpp"
#include "pmwb/measure.hpp"
#include "pmwb/solver.hpp"
#include "pmwb/vcpu.hpp"

namespace pmwb::cli {

/// Invalid configuration; the message starts with "file:line:" when it
/// points into a config file.
class ConfigError : public Error {
public:
  using Error::Error;
};

struct EvalSettings {
  std::size_t blocks = 1000;
  std::uint32_t block_size = 5;
  double bucket_width = 0.25;
  bool clip = true;
};

struct WorkbenchConfig {
  /// Ground-truth mapping driving the simulated CPU.
  std::optional<std::filesystem::path> mapping;
  std::filesystem::path out_dir = "pmwb-out";
  std::uint64_t seed = 0;
  SimConfig sim;
  MeasureConfig measure;
  /// n_ports 0 means "take it from the ground-truth mapping".
  SolverConfig solver = [] {
    SolverConfig s;
    s.n_ports = 0;
    return s;
  }();
  CharmapConfig charmap;
  EvalSettings eval;
  bool solver_command_set = false;
  bool sim_seed_set = false;
};

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::string> solver;
  std::optional<double> epsilon;
  std::optional<std::string> r_max;
};

/// Parses the key/value config format:
///
///   mapping = "truth.json"      # relative to the config file
///   out = "results"
///   seed = 7
///   [sim]      r_max, noise, seed
///   [measure]  epsilon, repetitions
///   [solver]   command, timeout_ms, multiplicity_bound, n_ports, improper = ["id:shared"]
///   [charmap]  votes, didactic_k
///   [eval]     blocks, block_size, bucket_width, clip
///
/// Unknown sections or keys, malformed values and missing referenced files
/// raise ConfigError with file:line.
WorkbenchConfig parse_config(const std::string& text, const std::string& origin,
                             const std::filesystem::path& base_dir);
WorkbenchConfig load_config(const std::filesystem::path& path);

/// Applies flag overrides, then PMWB_SOLVER (only when neither flag nor file
/// set a solver command), and copies shared settings (epsilon, r_max, seeds)
/// into every module's config.
void finalize_config(WorkbenchConfig& cfg, const Overrides& flags, const char* env_solver);

/// "2", "2.5" or "5/2".
Rational parse_rational(const std::string& text);

}  // namespace pmwb::cli
