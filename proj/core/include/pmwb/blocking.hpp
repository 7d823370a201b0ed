#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmwb/measure.hpp"

namespace pmwb {

/// Candidates found to block the same port set.
struct BlockingClass {
  std::string representative;  ///< lexicographically smallest member
  std::vector<std::string> members;
  unsigned port_count = 0;

  bool operator==(const BlockingClass&) const = default;
};

struct Exclusion {
  std::string id;
  std::string reason;
};

struct BlockingReport {
  std::vector<BlockingClass> classes;  ///< ascending port_count
  std::vector<Exclusion> excluded;
};

/// Instructions whose singleton experiment executes exactly one μop.
std::vector<std::string> find_candidates(const std::vector<std::string>& insns, Harness& harness);

/// Number of ports of a single-μop instruction: round(1 / cycles([i])).
/// Throws NonIntegralPortCount when the reciprocal is further than
/// epsilon * n from the nearest integer n.
unsigned port_count(const std::string& id, Harness& harness);

/// True when cycles([i, j]) = cycles([i]) + cycles([j]) within 2 * epsilon,
/// i.e. both instructions compete for exactly the same ports.
bool equivalent(const std::string& i, const std::string& j, Harness& harness);

/// Groups candidates by port count, merges equivalent pairs, and picks one
/// representative per class. Candidates with a non-integral port count are
/// listed in `excluded` instead of failing the whole run.
BlockingReport select_representatives(const std::vector<std::string>& candidates, Harness& harness);

/// [ { "representative": ..., "members": [...], "port_count": n }, ... ]
nlohmann::json blocking_classes_to_json(const std::vector<BlockingClass>& classes);
std::vector<BlockingClass> blocking_classes_from_json(const nlohmann::json& j);

}  // namespace pmwb
