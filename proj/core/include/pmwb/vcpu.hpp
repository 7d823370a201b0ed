#pragma once

#include <cstdint>
#include <optional>

#include "pmwb/mapping.hpp"

namespace pmwb {

struct SimConfig {
  /// Sustained instructions-per-cycle ceiling; absent means no clipping.
  std::optional<Rational> r_max;
  /// Standard deviation of the multiplicative Gaussian noise on cycles.
  double noise_rel_std = 0.0;
  std::uint64_t rng_seed = 0;
};

/// Inverse throughput of e under m: the maximum over nonempty port subsets Q of
/// (mass restricted to Q) / |Q|. Exact; 0 for the empty experiment.
/// Throws UnknownInstruction.
Rational bottleneck_throughput(const PortMapping& m, const Experiment& e);

/// Independent check of bottleneck_throughput: the smallest candidate cycle
/// count for which a max-flow from μops to ports can place all mass.
Rational lp_throughput_oracle(const PortMapping& m, const Experiment& e);

/// max(t, |e| / r_max), or t when r_max is absent.
Rational clip_throughput(const Rational& t, std::uint64_t size, const std::optional<Rational>& r_max);

/// bottleneck_throughput clipped by r_max.
Rational clipped_throughput(const PortMapping& m, const Experiment& e, const std::optional<Rational>& r_max);

/// Simulated cycle count: clipped throughput times (1 + g), g ~ N(0, noise_rel_std).
/// The generator is seeded from cfg.rng_seed, the experiment, and `draw`, so
/// equal arguments give equal results. Never negative.
double simulate_cycles(const PortMapping& m, const Experiment& e, const SimConfig& cfg, std::uint64_t draw = 0);

/// Total μops executed for e; honours uop_count_override.
std::uint64_t simulate_uops(const PortMapping& m, const Experiment& e);

/// Stable 64-bit hash of an experiment (FNV-1a over its key).
std::uint64_t experiment_hash(const Experiment& e);

}  // namespace pmwb
