#include "pmwb/charmap.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pmwb/io.hpp"

namespace pmwb {

using nlohmann::json;

BlockingSuite::BlockingSuite(std::vector<SuiteEntry> entries) : entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(), [](const SuiteEntry& a, const SuiteEntry& b) {
    if (a.ports.size() != b.ports.size()) return a.ports.size() < b.ports.size();
    return a.blocker < b.blocker;
  });
  std::set<PortSet> seen;
  for (const auto& e : entries_) {
    if (e.ports.empty()) throw std::invalid_argument("blocking instruction '" + e.blocker + "' has no ports");
    if (!seen.insert(e.ports).second)
      throw std::invalid_argument("two blocking instructions for port set " + e.ports.to_string());
  }
}

BlockingSuite BlockingSuite::from_core_mapping(const PortMapping& core, const std::vector<std::string>& exclude) {
  std::vector<SuiteEntry> entries;
  for (const auto& [id, insn] : core.instructions()) {
    if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
    const auto& uops = insn.usage.entries();
    if (uops.size() == 1 && uops.front().count == 1) entries.push_back({id, uops.front().ports});
  }
  return BlockingSuite(std::move(entries));
}

bool BlockingSuite::covers(PortSet ports) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const SuiteEntry& e) { return e.ports == ports; });
}

double BlockingSuite::baseline(const SuiteEntry& entry, std::uint32_t k, Harness& harness) const {
  auto key = std::make_tuple(entry.blocker, k, harness.epoch());
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double cycles = harness.cycles(Experiment{{entry.blocker, k}});
  std::lock_guard lock(mutex_);
  cache_.emplace(key, cycles);
  return cycles;
}

std::uint32_t compute_k(unsigned pu_size, std::uint32_t uop_count, double tp_single, bool didactic) {
  if (pu_size == 0 || uop_count == 0 || !(tp_single > 0.0))
    throw std::invalid_argument("compute_k needs positive inputs");
  const std::uint64_t needed = static_cast<std::uint64_t>(pu_size) * uop_count;
  if (needed > 100)
    throw KTooLarge("k would need " + std::to_string(needed) + " blocking instructions, more than 100");
  if (didactic) return static_cast<std::uint32_t>(needed);
  const auto floor_tp = static_cast<std::uint64_t>(std::max(1.0, std::floor(tp_single)));
  const std::uint64_t k = std::min<std::uint64_t>(100, std::max({std::uint64_t{10}, needed, 2 * pu_size * floor_tp}));
  return static_cast<std::uint32_t>(k);
}

std::uint32_t count_blocked_uops(const std::string& id, const SuiteEntry& entry, std::uint32_t k,
                                 const BlockingSuite& suite, Harness& harness, const CharmapConfig& cfg) {
  Experiment loaded{{entry.blocker, k}};
  loaded.add(id);
  const double base = suite.baseline(entry, k, harness);
  const double pu = static_cast<double>(entry.ports.size());
  const double raw = (harness.cycles(loaded) - base) * pu;
  const double nearest = std::round(raw);
  if (std::abs(raw - nearest) > cfg.epsilon * k * pu)
    throw NonIntegralSurplus("surplus of '" + id + "' against '" + entry.blocker + "' is " + format_fixed(raw));
  if (nearest < 0)
    throw NegativeSurplus("surplus of '" + id + "' against '" + entry.blocker + "' is " + format_fixed(raw));
  return static_cast<std::uint32_t>(nearest);
}

Characterization characterize(const std::string& id, const BlockingSuite& suite, Harness& harness,
                              const CharmapConfig& cfg) {
  const Measurement single = harness.measure(Experiment{{id, 1}});
  Characterization out;
  out.measured_uops = single.uops;
  const auto uops = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, single.uops));

  std::vector<UopEntry> found;
  for (const auto& entry : suite.entries()) {
    const auto k = compute_k(entry.ports.size(), uops, single.cycles, cfg.didactic_k);
    std::int64_t surplus = count_blocked_uops(id, entry, k, suite, harness, cfg);
    // μops already attributed to smaller port sets inside pu also show up here.
    for (const auto& f : found)
      if (f.ports.proper_subset_of(entry.ports)) surplus -= f.count;
    if (surplus < 0)
      throw NegativeSurplus("'" + id + "' against '" + entry.blocker + "' leaves " + std::to_string(surplus) +
                            " μops after subtracting smaller port sets");
    if (surplus > 0) found.push_back({entry.ports, static_cast<std::uint32_t>(surplus)});
  }
  out.usage = PortUsage(std::move(found));
  out.partial = out.usage.total() != single.uops;
  return out;
}

namespace {

json characterization_to_json(const Characterization& c) {
  json j = {{"uops", usage_to_json(c.usage)}, {"measured_uops", c.measured_uops}};
  if (c.partial) j["partial"] = true;
  return j;
}

}  // namespace

CharacterizationReport characterize_all(const std::vector<std::string>& insns, const BlockingSuite& suite,
                                        Harness& harness, const CharmapConfig& cfg) {
  if (cfg.votes == 0 || cfg.votes % 2 == 0) throw std::invalid_argument("votes must be a positive odd number");
  CharacterizationReport report;
  const std::uint64_t epoch0 = harness.epoch();

  for (const auto& id : insns) {
    std::vector<Characterization> ok;
    json runs = json::array();
    for (std::uint32_t r = 0; r < cfg.votes; ++r) {
      harness.set_epoch(epoch0 + r);
      try {
        ok.push_back(characterize(id, suite, harness, cfg));
        runs.push_back(characterization_to_json(ok.back()));
      } catch (const ModelViolation& e) {
        runs.push_back({{"error", e.what()}});
      } catch (const KTooLarge& e) {
        runs.push_back({{"error", e.what()}});
      } catch (const BackendFailure& e) {
        runs.push_back({{"error", e.what()}});
      }
    }
    harness.set_epoch(epoch0);

    const Characterization* winner = nullptr;
    for (const auto& c : ok) {
      auto agree = std::count_if(ok.begin(), ok.end(), [&](const Characterization& o) {
        return o.usage == c.usage && o.partial == c.partial;
      });
      if (2 * static_cast<std::uint32_t>(agree) > cfg.votes) {
        winner = &c;
        break;
      }
    }
    if (winner) {
      report.results[id] = *winner;
    } else {
      std::string reason = cfg.votes == 1 ? runs[0].value("error", "run failed") : "no majority among runs";
      report.excluded.push_back({id, reason, runs});
    }
  }
  return report;
}

json report_to_json(const CharacterizationReport& r) {
  json results = json::object();
  for (const auto& [id, c] : r.results) results[id] = characterization_to_json(c);
  json excluded = json::array();
  for (const auto& x : r.excluded) excluded.push_back({{"id", x.id}, {"reason", x.reason}, {"runs", x.runs}});
  return {{"results", std::move(results)}, {"excluded", std::move(excluded)}};
}

CharacterizationReport report_from_json(const json& j, unsigned n_ports) {
  try {
    CharacterizationReport r;
    for (const auto& [id, c] : j.at("results").items()) {
      Characterization out;
      out.usage = usage_from_json(c.at("uops"), n_ports);
      out.measured_uops = c.value("measured_uops", static_cast<std::uint64_t>(out.usage.total()));
      out.partial = c.value("partial", false);
      r.results[id] = out;
    }
    for (const auto& x : j.at("excluded"))
      r.excluded.push_back({x.at("id").get<std::string>(), x.at("reason").get<std::string>(), x.value("runs", json::array())});
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid characterization report: ") + e.what());
  }
}

PortMapping report_mapping(const CharacterizationReport& r, unsigned n_ports) {
  PortMapping m(n_ports);
  for (const auto& [id, c] : r.results)
    if (!c.usage.empty()) m.set(id, c.usage);
  return m;
}

}  // namespace pmwb
