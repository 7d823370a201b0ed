#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "pmwb/port_set.hpp"

namespace pmwb {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

/// A μop kind within a port usage: which ports it may use, and how many of it.
struct UopEntry {
  PortSet ports;
  std::uint32_t count = 1;

  bool operator==(const UopEntry&) const = default;
};

/// Multiset of port sets describing the μops of one instruction.
class PortUsage {
public:
  PortUsage() = default;
  /// Entries are merged and sorted on construction.
  explicit PortUsage(std::vector<UopEntry> entries);

  const std::vector<UopEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  /// Total number of μops.
  std::uint32_t total() const noexcept;
  /// Multiplicity of exactly this port set, 0 if absent.
  std::uint32_t multiplicity(PortSet ports) const noexcept;

  bool operator==(const PortUsage&) const = default;

private:
  std::vector<UopEntry> entries_;
};

struct InstructionScheme {
  std::string id;
  std::optional<std::uint32_t> uop_count_override;
};

/// Ground truth or inferred port mapping: instruction → μop multiset → port sets.
class PortMapping {
public:
  struct Instruction {
    PortUsage usage;
    std::optional<std::uint32_t> uop_count_override;
    bool operator==(const Instruction&) const = default;
  };

  PortMapping() = default;
  explicit PortMapping(unsigned n_ports);

  unsigned n_ports() const noexcept { return n_ports_; }

  /// Adds or replaces an instruction. Throws std::invalid_argument if any μop
  /// port set is empty or references a port >= n_ports.
  void set(const std::string& id, PortUsage usage, std::optional<std::uint32_t> uop_count_override = {});

  bool contains(const std::string& id) const { return insns_.count(id) != 0; }
  /// Throws UnknownInstruction.
  const Instruction& at(const std::string& id) const;
  const PortUsage& usage(const std::string& id) const { return at(id).usage; }
  /// Measured μop count: the override when set, else the total multiplicity.
  std::uint32_t uops(const std::string& id) const;

  const std::map<std::string, Instruction>& instructions() const noexcept { return insns_; }
  std::vector<std::string> ids() const;

  bool operator==(const PortMapping&) const = default;

private:
  unsigned n_ports_ = 0;
  std::map<std::string, Instruction> insns_;
};

/// Multiset of instruction ids. Counts are strictly positive.
class Experiment {
public:
  Experiment() = default;
  Experiment(std::initializer_list<std::pair<const std::string, std::uint32_t>> init);
  explicit Experiment(std::map<std::string, std::uint32_t> counts);

  /// Adds n occurrences of id (n = 0 is a no-op).
  void add(const std::string& id, std::uint32_t n = 1);

  const std::map<std::string, std::uint32_t>& counts() const noexcept { return counts_; }
  std::uint32_t count(const std::string& id) const;
  bool empty() const noexcept { return counts_.empty(); }

  /// Each count multiplied by n.
  Experiment scaled(std::uint32_t n) const;
  /// Stable textual key, e.g. "add:6,fma:1".
  std::string key() const;

  auto operator<=>(const Experiment&) const = default;

private:
  std::map<std::string, std::uint32_t> counts_;
};

std::uint64_t experiment_size(const Experiment& e);

/// Total μop mass per port set for e under m, merged across instructions.
std::map<PortSet, std::int64_t> uop_mass(const PortMapping& m, const Experiment& e);

PortMapping canonicalize(const PortMapping& m);

/// Applies a port relabeling: port p becomes perm[p].
PortMapping relabel_ports(const PortMapping& m, const std::vector<unsigned>& perm);

/// Relabels ports to the lexicographically smallest mapping among all port
/// permutations (exhaustive up to 8 ports; beyond that ports are ordered by a
/// usage signature). Two mappings that differ only in port names compare
/// equal afterwards.
PortMapping canonical_port_labels(const PortMapping& m);

}  // namespace pmwb
