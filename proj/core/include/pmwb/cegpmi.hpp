#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmwb/errors.hpp"
#include "pmwb/measure.hpp"
#include "pmwb/solver.hpp"

namespace pmwb {

/// One round of the inference loop.
struct CegpmiIteration {
  std::optional<PortMapping> m1;
  std::optional<PortMapping> m2;
  std::optional<Experiment> new_exp;
  std::optional<double> cycles;
  /// Size bound the distinguishing query ran with; absent in the final stage.
  std::optional<std::uint32_t> size_bound;
  /// Set when a proposed experiment was already measured and got rejected.
  bool duplicate = false;
};

struct CegpmiState {
  std::vector<std::string> insns;
  std::vector<Observation> exps;
  std::uint32_t size_bound = 1;
  /// True once the bounded stages are exhausted.
  bool final_stage = false;
  std::uint64_t iterations = 0;
  std::vector<CegpmiIteration> transcript;

  bool has_experiment(const Experiment& e) const;
};

nlohmann::json iteration_to_json(const CegpmiIteration& it);
CegpmiIteration iteration_from_json(const nlohmann::json& j);
nlohmann::json state_to_json(const CegpmiState& s);
CegpmiState state_from_json(const nlohmann::json& j);

struct CegpmiOptions {
  /// Run transcript, JSON lines, rewritten after every iteration.
  std::optional<std::filesystem::path> transcript_path;
  /// Resumable state, rewritten after every iteration and on abort.
  std::optional<std::filesystem::path> state_path;
  /// Raw SMT-LIB commands sent to the solver.
  std::optional<std::filesystem::path> smt_log_path;
  std::uint64_t max_iterations = 1000;
};

/// Inference stopped by a solver or backend failure. state() can be passed
/// back to resume; cause() is the original exception.
class CegpmiAborted : public Error {
public:
  CegpmiAborted(const std::string& what, CegpmiState state, std::exception_ptr cause)
      : Error(what), state_(std::move(state)), cause_(std::move(cause)) {}
  const CegpmiState& state() const noexcept { return state_; }
  std::exception_ptr cause() const noexcept { return cause_; }

private:
  CegpmiState state_;
  std::exception_ptr cause_;
};

struct CegpmiResult {
  /// Absent when no mapping explains the observations.
  std::optional<PortMapping> mapping;
  CegpmiState state;
};

/// Counter-example-guided inference of the single-μop core mapping of
/// `insns`. Every instruction needs a port-count fact (or an improper-blocker
/// entry) in `cfg`. Observations are taken through `harness`. When `resume`
/// is given the run continues from that state instead of re-seeding.
/// Throws CegpmiAborted on SolverTimeout, SolverUnknown, SolverProtocolError
/// and BackendFailure.
CegpmiResult run_cegpmi(const std::vector<std::string>& insns, Harness& harness, const SolverConfig& cfg,
                        const CegpmiOptions& options = {}, std::optional<CegpmiState> resume = {});

/// Convenience wrapper running against `backend` with a fresh harness.
std::optional<PortMapping> infer_core_mapping(const std::vector<std::string>& insns, MeasurementBackend& backend,
                                              const SolverConfig& solver_cfg, const MeasureConfig& measure_cfg);

}  // namespace pmwb
