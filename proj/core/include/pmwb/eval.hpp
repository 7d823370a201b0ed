#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmwb/charmap.hpp"
#include "pmwb/mapping.hpp"
#include "pmwb/measure.hpp"

namespace pmwb {

/// Instructions "i0", "i1", ... (zero-padded to a common width), each with
/// 1..max_uops μops on uniformly random nonempty port sets. Deterministic in seed.
PortMapping gen_random_mapping(unsigned n_insns, unsigned n_ports, unsigned max_uops, std::uint64_t seed);

/// A random mapping together with one single-μop blocking instruction
/// ("b0", "b1", ...) for every port set its μops use.
struct BlockableInstance {
  PortMapping mapping;
  std::vector<SuiteEntry> suite;
  std::vector<std::string> characterized;  ///< the non-blocking instructions
};

BlockableInstance gen_blockable_mapping(unsigned n_insns, unsigned n_ports, unsigned max_uops, std::uint64_t seed);

/// `count` experiments of exactly `block_size` instructions drawn uniformly
/// with repetition. Deterministic in seed.
std::vector<Experiment> gen_random_blocks(const std::vector<std::string>& insns, std::size_t count,
                                          std::uint32_t block_size, std::uint64_t seed);

struct IpcPrediction {
  double clipped = 0.0;
  double unclipped = 0.0;
};

/// |e| / max(tp(m, e), |e| / r_max), and the same without the r_max term.
/// Throws ZeroThroughputModel when the model yields zero cycles.
IpcPrediction predict_ipc_both(const PortMapping& m, const Experiment& e, const std::optional<Rational>& r_max);
double predict_ipc(const PortMapping& m, const Experiment& e, const std::optional<Rational>& r_max);

struct AccuracyReport {
  double mape = 0.0;  ///< percent
  double pcc = 0.0;
  double kendall_tau = 0.0;
  std::size_t n = 0;
  /// A constant input made pcc and kendall_tau undefined (NaN).
  bool degenerate = false;
};

/// MAPE (relative to `meas`), Pearson correlation and Kendall's tau-b.
/// Throws std::invalid_argument for mismatched lengths, fewer than two
/// samples, or non-positive measurements.
AccuracyReport metrics(const std::vector<double>& pred, const std::vector<double>& meas);

/// Kendall's tau-b, O(n^2). NaN when either sequence is constant.
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// {"mape", "pcc", "kendall_tau", "n"}; undefined values are null.
nlohmann::json accuracy_to_json(const AccuracyReport& r);

/// First experiment of size 1..max_size, in (size, lexicographic) order, on
/// which the clipped throughputs of m1 and m2 differ by more than
/// 2 * epsilon * |e|; nullopt when there is none.
/// Throws ScopeMismatch when the mappings cover different instructions.
std::optional<Experiment> observational_equivalence(const PortMapping& m1, const PortMapping& m2,
                                                    const std::optional<Rational>& r_max, std::uint32_t max_size,
                                                    double epsilon = 0.02);

/// Calls f for every multiset of size 1..max_size over ids, in (size,
/// lexicographic) order, until f returns false.
template <typename F>
void for_each_experiment(const std::vector<std::string>& ids, std::uint32_t max_size, F&& f);

/// CSV "measured_bucket,predicted_bucket,count" with bucket floor(x / width).
/// Throws IoError.
void heatmap_export(const std::vector<double>& pred, const std::vector<double>& meas, double bucket_width,
                    const std::filesystem::path& path);
std::string heatmap_csv(const std::vector<double>& pred, const std::vector<double>& meas, double bucket_width);

struct IpcSamples {
  std::vector<double> predicted;
  std::vector<double> measured;
};

/// Predicted IPC under `model` and measured IPC from `harness` for each block.
IpcSamples collect_ipc(const PortMapping& model, Harness& harness, const std::vector<Experiment>& blocks,
                       const std::optional<Rational>& r_max, bool clip = true);

// ---------------------------------------------------------------------------

template <typename F>
void for_each_experiment(const std::vector<std::string>& ids, std::uint32_t max_size, F&& f) {
  const std::size_t n = ids.size();
  if (n == 0) return;
  for (std::uint32_t size = 1; size <= max_size; ++size) {
    std::vector<std::size_t> idx(size, 0);
    while (true) {
      Experiment e;
      for (auto i : idx) e.add(ids[i]);
      if (!f(e)) return;
      // Next non-decreasing index vector in lexicographic order.
      std::size_t pos = size;
      while (pos > 0 && idx[pos - 1] == n - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t q = pos; q < size; ++q) idx[q] = idx[pos - 1];
    }
  }
}

}  // namespace pmwb
