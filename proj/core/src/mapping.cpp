#include "pmwb/mapping.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "pmwb/errors.hpp"

namespace pmwb {

std::string PortSet::to_string() const {
  std::string out = "{";
  bool first = true;
  for (unsigned p : ports()) {
    if (!first) out += ",";
    out += std::to_string(p);
    first = false;
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// PortUsage

PortUsage::PortUsage(std::vector<UopEntry> entries) {
  std::map<PortSet, std::uint32_t> merged;
  for (const auto& e : entries) {
    if (e.count == 0) continue;
    merged[e.ports] += e.count;
  }
  entries_.reserve(merged.size());
  for (const auto& [ports, count] : merged) entries_.push_back({ports, count});
}

std::uint32_t PortUsage::total() const noexcept {
  std::uint32_t n = 0;
  for (const auto& e : entries_) n += e.count;
  return n;
}

std::uint32_t PortUsage::multiplicity(PortSet ports) const noexcept {
  for (const auto& e : entries_)
    if (e.ports == ports) return e.count;
  return 0;
}

// ---------------------------------------------------------------------------
// PortMapping

PortMapping::PortMapping(unsigned n_ports) : n_ports_(n_ports) {
  if (n_ports == 0 || n_ports > kMaxPorts)
    throw std::invalid_argument("number of ports must be in 1..16, got " + std::to_string(n_ports));
}

void PortMapping::set(const std::string& id, PortUsage usage, std::optional<std::uint32_t> uop_count_override) {
  for (const auto& e : usage.entries()) {
    if (e.ports.empty()) throw std::invalid_argument("instruction '" + id + "' has a μop with no ports");
    if (!e.ports.valid_for(n_ports_))
      throw std::invalid_argument("instruction '" + id + "' uses port outside 0.." + std::to_string(n_ports_ - 1));
  }
  insns_[id] = Instruction{std::move(usage), uop_count_override};
}

const PortMapping::Instruction& PortMapping::at(const std::string& id) const {
  auto it = insns_.find(id);
  if (it == insns_.end()) throw UnknownInstruction(id);
  return it->second;
}

std::uint32_t PortMapping::uops(const std::string& id) const {
  const auto& insn = at(id);
  return insn.uop_count_override.value_or(insn.usage.total());
}

std::vector<std::string> PortMapping::ids() const {
  std::vector<std::string> out;
  out.reserve(insns_.size());
  for (const auto& [id, _] : insns_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

Experiment::Experiment(std::initializer_list<std::pair<const std::string, std::uint32_t>> init) {
  for (const auto& [id, n] : init) add(id, n);
}

Experiment::Experiment(std::map<std::string, std::uint32_t> counts) {
  for (const auto& [id, n] : counts) add(id, n);
}

void Experiment::add(const std::string& id, std::uint32_t n) {
  if (n == 0) return;
  counts_[id] += n;
}

std::uint32_t Experiment::count(const std::string& id) const {
  auto it = counts_.find(id);
  return it == counts_.end() ? 0 : it->second;
}

Experiment Experiment::scaled(std::uint32_t n) const {
  Experiment out;
  for (const auto& [id, c] : counts_) out.add(id, c * n);
  return out;
}

std::string Experiment::key() const {
  std::string out;
  for (const auto& [id, c] : counts_) {
    if (!out.empty()) out += ',';
    out += id;
    out += ':';
    out += std::to_string(c);
  }
  return out;
}

std::uint64_t experiment_size(const Experiment& e) {
  std::uint64_t n = 0;
  for (const auto& [_, c] : e.counts()) n += c;
  return n;
}

std::map<PortSet, std::int64_t> uop_mass(const PortMapping& m, const Experiment& e) {
  std::map<PortSet, std::int64_t> mass;
  for (const auto& [id, c] : e.counts())
    for (const auto& entry : m.usage(id).entries())
      mass[entry.ports] += static_cast<std::int64_t>(c) * entry.count;
  return mass;
}

PortMapping canonicalize(const PortMapping& m) {
  // PortUsage is kept merged and sorted by construction; rebuilding through
  // the constructor is enough.
  PortMapping out(m.n_ports());
  for (const auto& [id, insn] : m.instructions())
    out.set(id, PortUsage(insn.usage.entries()), insn.uop_count_override);
  return out;
}

PortMapping relabel_ports(const PortMapping& m, const std::vector<unsigned>& perm) {
  if (perm.size() != m.n_ports()) throw std::invalid_argument("permutation size does not match port count");
  PortMapping out(m.n_ports());
  for (const auto& [id, insn] : m.instructions()) {
    std::vector<UopEntry> entries;
    for (const auto& e : insn.usage.entries()) {
      PortSet s;
      for (unsigned p : e.ports.ports()) s.insert(perm.at(p));
      entries.push_back({s, e.count});
    }
    out.set(id, PortUsage(std::move(entries)), insn.uop_count_override);
  }
  return out;
}

namespace {

std::vector<std::uint32_t> comparison_key(const PortMapping& m) {
  std::vector<std::uint32_t> key;
  for (const auto& [id, insn] : m.instructions()) {
    key.push_back(static_cast<std::uint32_t>(insn.usage.entries().size()));
    for (const auto& e : insn.usage.entries()) {
      key.push_back(e.ports.size());
      key.push_back(e.ports.bits());
      key.push_back(e.count);
    }
  }
  return key;
}

}  // namespace

PortMapping canonical_port_labels(const PortMapping& m) {
  const unsigned n = m.n_ports();
  std::vector<unsigned> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);

  if (n <= 8) {
    PortMapping best = canonicalize(m);
    auto best_key = comparison_key(best);
    while (std::next_permutation(perm.begin(), perm.end())) {
      PortMapping cand = relabel_ports(m, perm);
      auto key = comparison_key(cand);
      if (key < best_key) {
        best_key = std::move(key);
        best = std::move(cand);
      }
    }
    return best;
  }

  // Too many permutations: order ports by how they are used.
  std::vector<std::vector<std::uint32_t>> signature(n);
  for (const auto& [id, insn] : m.instructions())
    for (const auto& e : insn.usage.entries())
      for (unsigned p : e.ports.ports()) {
        signature[p].push_back(e.ports.size());
        signature[p].push_back(e.count);
      }
  for (auto& s : signature) std::sort(s.begin(), s.end());
  std::vector<unsigned> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](unsigned a, unsigned b) { return signature[a] < signature[b]; });
  for (unsigned rank = 0; rank < n; ++rank) perm[order[rank]] = rank;
  return relabel_ports(m, perm);
}

}  // namespace pmwb
