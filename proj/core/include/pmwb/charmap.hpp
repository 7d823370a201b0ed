#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmwb/errors.hpp"
#include "pmwb/measure.hpp"

namespace pmwb {

struct CharmapConfig {
  double epsilon = 0.02;
  /// Use k = |pu| * uops(i) instead of the production formula.
  bool didactic_k = false;
  /// Independent characterization runs per instruction; must be odd.
  std::uint32_t votes = 1;
};

/// A blocking instruction and the ports its single μop can use.
struct SuiteEntry {
  std::string blocker;
  PortSet ports;

  bool operator==(const SuiteEntry&) const = default;
};

/// Blocking instructions sorted by ascending number of blocked ports, with a
/// cache of the baseline measurements [k x B].
class BlockingSuite {
public:
  /// Throws std::invalid_argument when two entries block the same port set.
  explicit BlockingSuite(std::vector<SuiteEntry> entries);

  /// One entry per single-μop instruction of a core mapping, skipping `exclude`.
  static BlockingSuite from_core_mapping(const PortMapping& core, const std::vector<std::string>& exclude = {});

  const std::vector<SuiteEntry>& entries() const noexcept { return entries_; }
  /// Whether some entry blocks exactly `ports`.
  bool covers(PortSet ports) const;

  /// Cycles of [k x blocker] in the harness's current epoch, cached.
  double baseline(const SuiteEntry& entry, std::uint32_t k, Harness& harness) const;

private:
  std::vector<SuiteEntry> entries_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<std::string, std::uint32_t, std::uint64_t>, double> cache_;
};

/// Number of blocking-instruction copies used against an instruction with
/// `uop_count` μops and singleton inverse throughput `tp_single`.
/// Throws KTooLarge when pu_size * uop_count exceeds 100.
std::uint32_t compute_k(unsigned pu_size, std::uint32_t uop_count, double tp_single, bool didactic = false);

/// μops of `id` that cannot evade the ports of `entry`: round((tp([k x B, i]) -
/// tp([k x B])) * |pu|). Throws NonIntegralSurplus when the unrounded value is
/// further than epsilon * k * |pu| from an integer, NegativeSurplus when it
/// rounds below zero.
std::uint32_t count_blocked_uops(const std::string& id, const SuiteEntry& entry, std::uint32_t k,
                                 const BlockingSuite& suite, Harness& harness, const CharmapConfig& cfg);

struct Characterization {
  PortUsage usage;
  std::uint64_t measured_uops = 0;
  /// Found μops do not add up to the measured count.
  bool partial = false;
};

/// Port usage of one instruction from its surplus against every suite entry.
/// Throws NegativeSurplus, NonIntegralSurplus, KTooLarge.
Characterization characterize(const std::string& id, const BlockingSuite& suite, Harness& harness,
                              const CharmapConfig& cfg);

struct CharExclusion {
  std::string id;
  std::string reason;
  /// One entry per run: a "uops" result or an "error" message.
  nlohmann::json runs = nlohmann::json::array();
};

struct CharacterizationReport {
  std::map<std::string, Characterization> results;
  std::vector<CharExclusion> excluded;
};

/// Runs characterize cfg.votes times per instruction, each run in its own
/// measurement epoch, and keeps the result reached by a strict majority.
CharacterizationReport characterize_all(const std::vector<std::string>& insns, const BlockingSuite& suite,
                                        Harness& harness, const CharmapConfig& cfg);

nlohmann::json report_to_json(const CharacterizationReport& r);
CharacterizationReport report_from_json(const nlohmann::json& j, unsigned n_ports);

/// Mapping of every reported result with at least one μop, partial ones included.
PortMapping report_mapping(const CharacterizationReport& r, unsigned n_ports);

}  // namespace pmwb
