#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmwb/mapping.hpp"
#include "pmwb/smt.hpp"

namespace pmwb {

/// A two-μop stand-in blocker: one μop equal to the μop of the proper
/// blocking instruction `shared_with`, one μop of its own.
struct ImproperBlocker {
  std::string id;
  std::string shared_with;
};

struct SolverConfig {
  double epsilon = 0.02;
  std::optional<Rational> r_max;
  unsigned n_ports = 1;
  /// Number of ports of each instruction's μop. For improper blockers the
  /// fact (optional) constrains their own μop.
  std::map<std::string, unsigned> port_counts;
  /// Upper bound of every exp[i] in free experiments.
  std::uint32_t multiplicity_bound = 20;
  std::string solver_command = "z3 -in";
  std::chrono::milliseconds timeout{600000};
  std::vector<ImproperBlocker> improper_blockers;

  /// Instructions in scope, sorted by id: port-count facts plus improper blockers.
  std::vector<std::string> scope() const;
  smt::SessionOptions session_options() const;
};

/// An observed (experiment, cycles) pair.
struct Observation {
  Experiment experiment;
  double cycles = 0.0;

  bool operator==(const Observation&) const = default;
};

// ---------------------------------------------------------------------------
// Encodings. Terms are SMT-LIB strings: either constant names or literals.

/// One μop u: its per-port membership terms m[u, k] and its multiplicity per
/// occurrence of the owning instruction.
struct UopTerms {
  std::string insn;
  std::uint32_t multiplicity = 1;
  std::vector<std::string> on_port;  ///< n_ports Bool terms
};

struct MappingEncoding {
  unsigned n_ports = 0;
  std::vector<UopTerms> uops;
  /// Declared Bool constants (empty for hardwired encodings).
  std::vector<std::string> variables;
};

struct ExperimentEncoding {
  /// Int term per instruction in scope.
  std::map<std::string, std::string> count;
  /// Constant values when hardwired.
  std::optional<Experiment> fixed;
  std::vector<std::string> variables;
};

struct ThroughputEncoding {
  std::string prefix;  ///< prefix of the instance-local constants
  std::string t;       ///< Real term: clipped inverse throughput
};

/// Accumulates the commands of one query; names are generated from a
/// per-script counter so that transcripts are reproducible.
class Script {
public:
  void declare(const std::string& name, const std::string& sort);
  void assert_that(const std::string& term);
  std::string fresh(const std::string& stem);

  const std::vector<std::string>& commands() const noexcept { return commands_; }

private:
  std::vector<std::string> commands_;
  std::map<std::string, unsigned> counters_;
};

/// Free mapping over the scope: one μop per instruction (two for improper
/// blockers) with exactly port_counts[i] ports.
MappingEncoding encode_free_mapping(Script& script, const std::string& prefix, const SolverConfig& cfg);
/// Hardwired mapping: one μop per usage entry, constant membership.
MappingEncoding encode_fixed_mapping(const PortMapping& m, const std::vector<std::string>& scope);

/// Free experiment: exp[i] >= 0, and when bounded exp[i] <= multiplicity_bound
/// and sum <= size_bound.
ExperimentEncoding encode_free_experiment(Script& script, const std::string& prefix, const SolverConfig& cfg,
                                          std::optional<std::uint32_t> size_bound);
ExperimentEncoding encode_fixed_experiment(const Experiment& e, const std::vector<std::string>& scope);

/// Declares a fresh throughput encoding.
ThroughputEncoding encode_throughput(Script& script);

/// Emits the constraint system tying mapping, experiment and throughput:
/// tenc.t equals the inverse throughput of the experiment under the mapping,
/// clipped at |e| / r_max when configured. All products are guarded by
/// if-then-else so the system stays linear.
void emit_relate_throughput(Script& script, const MappingEncoding& menc, const ExperimentEncoding& eenc,
                            const ThroughputEncoding& tenc, const SolverConfig& cfg);

/// SMT-LIB Real term for |e| of an experiment encoding.
std::string size_term(const ExperimentEncoding& eenc);

// ---------------------------------------------------------------------------
// Queries

/// A mapping reproducing every observation within epsilon * |e| cycles, or
/// nullopt when none exists. Throws SolverTimeout, SolverUnknown,
/// SolverProtocolError, EncodingError.
std::optional<PortMapping> find_mapping(const std::vector<Observation>& exps, const SolverConfig& cfg,
                                        smt::Session& session);

struct Distinguisher {
  PortMapping mapping;
  Experiment experiment;
  Rational t_given;  ///< clipped throughput of `experiment` under the given mapping
  Rational t_other;  ///< ... and under `mapping`
};

/// A second mapping consistent with `exps` and an experiment of size >= 1
/// whose clipped throughputs under m1 and the new mapping differ by more than
/// 2 * epsilon * |e|. The result is re-checked with the simulator; a gap
/// violation throws SolverProtocolError.
std::optional<Distinguisher> find_other_mapping(const std::vector<Observation>& exps, const PortMapping& m1,
                                                const SolverConfig& cfg, std::optional<std::uint32_t> size_bound,
                                                smt::Session& session);

/// Number of find_other_mapping results verified against the simulator in
/// this process.
std::uint64_t verified_distinguishers();

/// True if any multiplication in the script has two or more non-numeral
/// arguments.
bool has_nonlinear_product(const std::string& script_text);

}  // namespace pmwb
