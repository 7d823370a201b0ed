#include "pmwb/blocking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "pmwb/errors.hpp"

namespace pmwb {

std::vector<std::string> find_candidates(const std::vector<std::string>& insns, Harness& harness) {
  if (insns.empty()) throw std::invalid_argument("no instructions to examine");
  std::vector<std::string> out;
  for (const auto& id : insns)
    if (harness.measure(Experiment{{id, 1}}).uops == 1) out.push_back(id);
  return out;
}

unsigned port_count(const std::string& id, Harness& harness) {
  const double tp = harness.cycles(Experiment{{id, 1}});
  if (!(tp > 0.0)) throw NonIntegralPortCount("'" + id + "' executes in zero cycles");
  const double per_cycle = 1.0 / tp;
  const double nearest = std::round(per_cycle);
  if (nearest < 1.0 || std::abs(per_cycle - nearest) > harness.config().epsilon * nearest)
    throw NonIntegralPortCount("'" + id + "' executes " + std::to_string(per_cycle) + " times per cycle");
  return static_cast<unsigned>(nearest);
}

bool equivalent(const std::string& i, const std::string& j, Harness& harness) {
  Experiment pair;
  pair.add(i);
  pair.add(j);
  const double joint = harness.cycles(pair);
  const double separate = harness.cycles(Experiment{{i, 1}}) + harness.cycles(Experiment{{j, 1}});
  return std::abs(joint - separate) <= 2.0 * harness.config().epsilon;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

BlockingReport select_representatives(const std::vector<std::string>& candidates, Harness& harness) {
  if (candidates.empty()) throw std::invalid_argument("no blocking candidates");
  BlockingReport report;

  std::map<unsigned, std::vector<std::string>> by_count;
  for (const auto& id : candidates) {
    try {
      by_count[port_count(id, harness)].push_back(id);
    } catch (const NonIntegralPortCount& err) {
      report.excluded.push_back({id, err.what()});
    }
  }

  for (auto& [count, group] : by_count) {
    std::sort(group.begin(), group.end());
    group.erase(std::unique(group.begin(), group.end()), group.end());
    UnionFind uf(group.size());
    for (std::size_t a = 0; a < group.size(); ++a)
      for (std::size_t b = a + 1; b < group.size(); ++b)
        if (uf.find(a) != uf.find(b) && equivalent(group[a], group[b], harness)) uf.unite(a, b);

    std::map<std::size_t, BlockingClass> classes;
    for (std::size_t a = 0; a < group.size(); ++a) {
      auto& cls = classes[uf.find(a)];
      cls.members.push_back(group[a]);
      cls.port_count = count;
    }
    // Roots are the smallest index, and the group is sorted, so the first
    // member is the lexicographically smallest id.
    for (auto& [root, cls] : classes) {
      cls.representative = cls.members.front();
      report.classes.push_back(std::move(cls));
    }
  }
  return report;
}

nlohmann::json blocking_classes_to_json(const std::vector<BlockingClass>& classes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : classes)
    arr.push_back({{"representative", c.representative}, {"members", c.members}, {"port_count", c.port_count}});
  return arr;
}

std::vector<BlockingClass> blocking_classes_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("blocking report must be an array");
  std::vector<BlockingClass> out;
  for (const auto& c : j) {
    try {
      out.push_back({c.at("representative").get<std::string>(), c.at("members").get<std::vector<std::string>>(),
                     c.at("port_count").get<unsigned>()});
    } catch (const nlohmann::json::exception& err) {
      throw FormatError(std::string("blocking class: ") + err.what());
    }
  }
  return out;
}

}  // namespace pmwb
