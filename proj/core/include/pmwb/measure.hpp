#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "pmwb/mapping.hpp"
#include "pmwb/vcpu.hpp"

namespace pmwb {

struct RawSample {
  double cycles = 0.0;
  std::uint64_t uops = 0;
};

/// Source of raw throughput observations. Hardware backends plug in here.
///
/// `draw` identifies the observation: calls with the same experiment and draw
/// should agree, different draws may differ by measurement noise. Failures are
/// reported as BackendFailure.
class MeasurementBackend {
public:
  virtual ~MeasurementBackend() = default;
  virtual RawSample raw_measure(const Experiment& e, std::uint64_t draw) = 0;
};

/// Runs experiments on the simulated CPU defined by a ground-truth mapping.
class SimulatedBackend final : public MeasurementBackend {
public:
  SimulatedBackend(PortMapping truth, SimConfig cfg) : truth_(std::move(truth)), cfg_(cfg) {}

  RawSample raw_measure(const Experiment& e, std::uint64_t draw) override;

  const PortMapping& truth() const noexcept { return truth_; }
  const SimConfig& config() const noexcept { return cfg_; }

private:
  PortMapping truth_;
  SimConfig cfg_;
};

struct MeasureConfig {
  /// CPI tolerance under which two observations count as equal.
  double epsilon = 0.02;
  std::uint32_t repetitions = 11;
};

struct Measurement {
  Experiment experiment;
  double cycles = 0.0;  ///< median of `repetitions` raw observations
  std::uint64_t uops = 0;
  std::uint32_t repetitions = 1;

  bool operator==(const Measurement&) const = default;
};

using MeasurementLog = std::vector<Measurement>;

/// Median-of-repetitions measurement (lower median for even counts); the μop
/// count is the most frequent observed value. `draw_base` selects an
/// independent series of observations.
Measurement measure(MeasurementBackend& backend, const Experiment& e, const MeasureConfig& cfg,
                    std::uint64_t draw_base = 0);

/// |cycles1/|e1| - cycles2/|e2|| <= epsilon. Reflexive and symmetric, not transitive.
bool cpi_equal(const Measurement& a, const Measurement& b, const MeasureConfig& cfg);

/// JSON lines: a {"schema":"pmwb-log-v1"} header, then one measurement per line.
void log_save(const MeasurementLog& log, const std::filesystem::path& path);
MeasurementLog log_load(const std::filesystem::path& path);
std::string log_to_text(const MeasurementLog& log);
MeasurementLog log_from_text(std::string_view text, const std::string& origin = "<log>");

/// Measurement session: memoizes by experiment and epoch, and keeps the log of
/// every distinct measurement taken. Safe for concurrent measure() calls.
class Harness {
public:
  Harness(MeasurementBackend& backend, MeasureConfig cfg) : backend_(backend), cfg_(cfg) {}

  Measurement measure(const Experiment& e);
  /// Cycles only, convenience for the inference stages.
  double cycles(const Experiment& e) { return measure(e).cycles; }

  /// Switches to a fresh, independent series of observations (used for
  /// repeated voting runs). Epoch 0 is the default.
  void set_epoch(std::uint64_t epoch);
  std::uint64_t epoch() const;

  const MeasureConfig& config() const noexcept { return cfg_; }
  MeasurementBackend& backend() noexcept { return backend_; }
  MeasurementLog log() const;
  std::size_t backend_runs() const;

private:
  MeasurementBackend& backend_;
  MeasureConfig cfg_;
  mutable std::mutex mutex_;
  std::uint64_t epoch_ = 0;
  std::map<std::pair<std::uint64_t, Experiment>, Measurement> cache_;
  MeasurementLog log_;
  std::size_t runs_ = 0;
};

}  // namespace pmwb
