#pragma once

#include <bit>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pmwb/io.hpp"
#include "pmwb/mapping.hpp"
#include "pmwb/solver.hpp"

#ifndef PMWB_TEST_SOLVER
#define PMWB_TEST_SOLVER "z3 -in"
#endif
#ifndef PMWB_TEST_DATA
#define PMWB_TEST_DATA "tests/data"
#endif

namespace pmwb::test {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(PMWB_TEST_DATA) / name; }

inline std::string solver_command() { return PMWB_TEST_SOLVER; }

inline UopEntry uop(std::initializer_list<unsigned> ports, std::uint32_t count = 1) { return {PortSet(ports), count}; }

/// The three-instruction example ISA: add on {0,1}; mul on {1}; fma = 2x{0,1} + 1x{1}.
inline PortMapping example_isa() {
  PortMapping m(2);
  m.set("add", PortUsage({uop({0, 1})}));
  m.set("mul", PortUsage({uop({1})}));
  m.set("fma", PortUsage({uop({0, 1}, 2), uop({1})}));
  return m;
}

/// Two instructions on two ports, one port each.
inline PortMapping split_ports() {
  PortMapping m(2);
  m.set("iA", PortUsage({uop({0})}));
  m.set("iB", PortUsage({uop({1})}));
  return m;
}

/// Both instructions on the same port.
inline PortMapping shared_port() {
  PortMapping m(2);
  m.set("iA", PortUsage({uop({0})}));
  m.set("iB", PortUsage({uop({0})}));
  return m;
}

/// Inverse throughput by explicit enumeration of every nonempty port subset,
/// written independently of the library: the mass of μops confined to Q,
/// divided by |Q|, maximized over Q.
inline Rational brute_force_throughput(const PortMapping& m, const Experiment& e) {
  Rational best(0);
  const unsigned n = m.n_ports();
  for (unsigned q = 1; q < (1u << n); ++q) {
    std::int64_t mass = 0;
    for (const auto& [id, count] : e.counts())
      for (const auto& entry : m.usage(id).entries())
        if ((entry.ports.bits() & ~q) == 0) mass += static_cast<std::int64_t>(count) * entry.count;
    const Rational r(mass, static_cast<std::int64_t>(std::popcount(q)));
    if (r > best) best = r;
  }
  return best;
}

/// Random experiment over the mapping's instructions with 1..max_size entries.
inline Experiment random_experiment(const PortMapping& m, std::mt19937_64& rng, unsigned max_size) {
  const auto ids = m.ids();
  std::uniform_int_distribution<unsigned> size(1, max_size);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  Experiment e;
  const unsigned n = size(rng);
  for (unsigned i = 0; i < n; ++i) e.add(ids[pick(rng)]);
  return e;
}

inline SolverConfig solver_config_for(const PortMapping& truth) {
  SolverConfig cfg;
  cfg.n_ports = truth.n_ports();
  cfg.solver_command = solver_command();
  cfg.timeout = std::chrono::milliseconds(120000);
  for (const auto& [id, insn] : truth.instructions()) cfg.port_counts[id] = insn.usage.entries().front().ports.size();
  return cfg;
}

}  // namespace pmwb::test
