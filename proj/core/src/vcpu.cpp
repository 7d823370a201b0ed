#include "pmwb/vcpu.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/push_relabel_max_flow.hpp>

namespace pmwb {

namespace {

struct Candidate {
  std::int64_t mass;
  std::int64_t ports;
};

bool greater(const Candidate& a, const Candidate& b) { return a.mass * b.ports > b.mass * a.ports; }

}  // namespace

Rational bottleneck_throughput(const PortMapping& m, const Experiment& e) {
  auto mass = uop_mass(m, e);
  if (mass.empty()) return Rational(0);

  std::vector<std::pair<std::uint32_t, std::int64_t>> sets;
  for (const auto& [ports, amount] : mass) sets.emplace_back(ports.bits(), amount);

  const unsigned n = m.n_ports();
  Candidate best{0, 1};

  // The maximizing Q can always be shrunk to a union of μop port sets, so
  // enumerating unions of the family is enough when it is smaller than the
  // port count. Otherwise sum over subsets of all 2^n port sets.
  if (sets.size() < n) {
    const std::uint32_t families = 1u << sets.size();
    for (std::uint32_t pick = 1; pick < families; ++pick) {
      std::uint32_t q = 0;
      for (std::size_t s = 0; s < sets.size(); ++s)
        if (pick & (1u << s)) q |= sets[s].first;
      std::int64_t restricted = 0;
      for (const auto& [bits, amount] : sets)
        if ((bits & ~q) == 0) restricted += amount;
      Candidate c{restricted, std::popcount(q)};
      if (greater(c, best)) best = c;
    }
  } else {
    std::vector<std::int64_t> sum(std::size_t{1} << n, 0);
    for (const auto& [bits, amount] : sets) sum[bits] += amount;
    for (unsigned bit = 0; bit < n; ++bit)
      for (std::size_t q = 0; q < sum.size(); ++q)
        if (q & (std::size_t{1} << bit)) sum[q] += sum[q ^ (std::size_t{1} << bit)];
    for (std::size_t q = 1; q < sum.size(); ++q) {
      Candidate c{sum[q], std::popcount(static_cast<std::uint32_t>(q))};
      if (greater(c, best)) best = c;
    }
  }
  return Rational(best.mass, best.ports);
}

namespace {

using FlowTraits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
using FlowGraph = boost::adjacency_list<
    boost::vecS, boost::vecS, boost::directedS, boost::no_property,
    boost::property<boost::edge_capacity_t, std::int64_t,
                    boost::property<boost::edge_residual_capacity_t, std::int64_t,
                                    boost::property<boost::edge_reverse_t, FlowTraits::edge_descriptor>>>>;

struct UopNode {
  std::uint16_t ports;
  std::int64_t mass;
};

// Can all μop mass be placed with every port carrying at most cycles = a/b?
// Capacities are scaled by b to stay integral.
bool feasible(const std::vector<UopNode>& uops, unsigned n_ports, std::int64_t a, std::int64_t b) {
  FlowGraph g(2 + uops.size() + n_ports);
  auto capacity = boost::get(boost::edge_capacity, g);
  auto reverse = boost::get(boost::edge_reverse, g);
  auto add_edge = [&](std::size_t from, std::size_t to, std::int64_t cap) {
    auto fwd = boost::add_edge(from, to, g).first;
    auto back = boost::add_edge(to, from, g).first;
    capacity[fwd] = cap;
    capacity[back] = 0;
    reverse[fwd] = back;
    reverse[back] = fwd;
  };
  const std::size_t source = 0, sink = 1, first_uop = 2, first_port = 2 + uops.size();
  std::int64_t total = 0;
  for (std::size_t u = 0; u < uops.size(); ++u) {
    const std::int64_t scaled = uops[u].mass * b;
    total += scaled;
    add_edge(source, first_uop + u, scaled);
    for (unsigned k = 0; k < n_ports; ++k)
      if (uops[u].ports & (1u << k)) add_edge(first_uop + u, first_port + k, scaled);
  }
  for (unsigned k = 0; k < n_ports; ++k) add_edge(first_port + k, sink, a);
  return boost::push_relabel_max_flow(g, source, sink) == total;
}

}  // namespace

Rational lp_throughput_oracle(const PortMapping& m, const Experiment& e) {
  std::vector<UopNode> uops;
  for (const auto& [id, c] : e.counts())
    for (const auto& entry : m.usage(id).entries())
      uops.push_back({entry.ports.bits(), static_cast<std::int64_t>(c) * entry.count});
  if (uops.empty()) return Rational(0);

  const unsigned n = m.n_ports();
  std::vector<Rational> candidates;
  for (std::uint32_t q = 1; q < (1u << n); ++q) {
    std::int64_t restricted = 0;
    for (const auto& u : uops)
      if ((u.ports & ~q) == 0) restricted += u.mass;
    candidates.emplace_back(restricted, std::popcount(q));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Feasibility is monotone in the cycle budget.
  std::size_t lo = 0, hi = candidates.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (feasible(uops, n, candidates[mid].numerator(), candidates[mid].denominator()))
      hi = mid;
    else
      lo = mid + 1;
  }
  return candidates[lo];
}

Rational clip_throughput(const Rational& t, std::uint64_t size, const std::optional<Rational>& r_max) {
  if (!r_max) return t;
  Rational floor_cycles = Rational(static_cast<std::int64_t>(size)) / *r_max;
  return std::max(t, floor_cycles);
}

Rational clipped_throughput(const PortMapping& m, const Experiment& e, const std::optional<Rational>& r_max) {
  return clip_throughput(bottleneck_throughput(m, e), experiment_size(e), r_max);
}

std::uint64_t experiment_hash(const Experiment& e) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : e.key()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

double simulate_cycles(const PortMapping& m, const Experiment& e, const SimConfig& cfg, std::uint64_t draw) {
  if (e.empty()) return 0.0;
  double t = to_double(clipped_throughput(m, e, cfg.r_max));
  if (cfg.noise_rel_std > 0.0) {
    std::mt19937_64 rng(mix(cfg.rng_seed ^ mix(experiment_hash(e) ^ mix(draw))));
    std::normal_distribution<double> noise(0.0, cfg.noise_rel_std);
    t *= 1.0 + noise(rng);
  }
  return std::max(t, 0.0);
}

std::uint64_t simulate_uops(const PortMapping& m, const Experiment& e) {
  std::uint64_t n = 0;
  for (const auto& [id, c] : e.counts()) n += static_cast<std::uint64_t>(c) * m.uops(id);
  return n;
}

}  // namespace pmwb
