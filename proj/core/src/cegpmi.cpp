#include "pmwb/cegpmi.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pmwb/io.hpp"
#include "pmwb/vcpu.hpp"

namespace pmwb {

using nlohmann::json;

bool CegpmiState::has_experiment(const Experiment& e) const {
  return std::any_of(exps.begin(), exps.end(), [&](const Observation& o) { return o.experiment == e; });
}

namespace {

template <typename T, typename F>
json optional_json(const std::optional<T>& v, F&& convert) {
  return v ? convert(*v) : json(nullptr);
}

std::optional<PortMapping> optional_mapping(const json& j) {
  if (j.is_null()) return std::nullopt;
  return mapping_from_json(j);
}

}  // namespace

json iteration_to_json(const CegpmiIteration& it) {
  json j = {
      {"m1", optional_json(it.m1, mapping_to_json)},
      {"m2", optional_json(it.m2, mapping_to_json)},
      {"newExp", optional_json(it.new_exp, counts_to_json)},
      {"cycles", optional_json(it.cycles, [](double c) { return json(c); })},
      {"size_bound", optional_json(it.size_bound, [](std::uint32_t b) { return json(b); })},
  };
  if (it.duplicate) j["duplicate"] = true;
  return j;
}

CegpmiIteration iteration_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("transcript entry must be an object");
  CegpmiIteration it;
  it.m1 = optional_mapping(j.value("m1", json(nullptr)));
  it.m2 = optional_mapping(j.value("m2", json(nullptr)));
  if (auto e = j.value("newExp", json(nullptr)); !e.is_null()) it.new_exp = counts_from_json(e);
  if (auto c = j.value("cycles", json(nullptr)); !c.is_null()) it.cycles = c.get<double>();
  if (auto b = j.value("size_bound", json(nullptr)); !b.is_null()) it.size_bound = b.get<std::uint32_t>();
  it.duplicate = j.value("duplicate", false);
  return it;
}

json state_to_json(const CegpmiState& s) {
  json exps = json::array();
  for (const auto& o : s.exps) exps.push_back({{"counts", counts_to_json(o.experiment)}, {"cycles", o.cycles}});
  json transcript = json::array();
  for (const auto& it : s.transcript) transcript.push_back(iteration_to_json(it));
  return {{"schema", "pmwb-cegpmi-state-v1"},
          {"insns", s.insns},
          {"exps", std::move(exps)},
          {"size_bound", s.size_bound},
          {"final_stage", s.final_stage},
          {"iterations", s.iterations},
          {"transcript", std::move(transcript)}};
}

CegpmiState state_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "pmwb-cegpmi-state-v1")
    throw FormatError("not a pmwb-cegpmi-state-v1 document");
  try {
    CegpmiState s;
    s.insns = j.at("insns").get<std::vector<std::string>>();
    for (const auto& o : j.at("exps")) s.exps.push_back({counts_from_json(o.at("counts")), o.at("cycles").get<double>()});
    s.size_bound = j.at("size_bound").get<std::uint32_t>();
    s.final_stage = j.at("final_stage").get<bool>();
    s.iterations = j.at("iterations").get<std::uint64_t>();
    for (const auto& it : j.value("transcript", json::array())) s.transcript.push_back(iteration_from_json(it));
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid inference state: ") + e.what());
  }
}

namespace {

SolverConfig restrict_scope(const SolverConfig& cfg, const std::vector<std::string>& insns) {
  SolverConfig out = cfg;
  out.port_counts.clear();
  out.improper_blockers.clear();
  for (const auto& id : insns) {
    auto improper = std::find_if(cfg.improper_blockers.begin(), cfg.improper_blockers.end(),
                                 [&](const ImproperBlocker& s) { return s.id == id; });
    if (improper != cfg.improper_blockers.end()) out.improper_blockers.push_back(*improper);
    auto fact = cfg.port_counts.find(id);
    if (fact != cfg.port_counts.end())
      out.port_counts.insert(*fact);
    else if (improper == cfg.improper_blockers.end())
      throw EncodingError("instruction '" + id + "' has no port-count fact");
  }
  return out;
}

bool within_band(const Rational& t, double cycles, std::uint64_t size, double epsilon) {
  return std::abs(to_double(t) - cycles) < epsilon * static_cast<double>(size);
}

class StateWriter {
public:
  explicit StateWriter(const CegpmiOptions& options) : options_(options) {}

  void write(const CegpmiState& s) const {
    if (options_.state_path) write_json_file(*options_.state_path, state_to_json(s));
    if (options_.transcript_path) {
      std::string text;
      for (const auto& it : s.transcript) text += iteration_to_json(it).dump() + "\n";
      write_text_file(*options_.transcript_path, text);
    }
  }

private:
  const CegpmiOptions& options_;
};

}  // namespace

CegpmiResult run_cegpmi(const std::vector<std::string>& insns, Harness& harness, const SolverConfig& solver_cfg,
                        const CegpmiOptions& options, std::optional<CegpmiState> resume) {
  if (insns.empty()) throw std::invalid_argument("no instructions to infer");
  const SolverConfig cfg = restrict_scope(solver_cfg, insns);
  const auto n_insns = static_cast<std::uint32_t>(cfg.scope().size());
  StateWriter writer(options);

  CegpmiState state;
  if (resume) {
    state = std::move(*resume);
    std::vector<std::string> a = state.insns, b = insns;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::invalid_argument("resumed state covers a different instruction set");
  } else {
    state.insns = insns;
  }

  auto abort_with = [&](const std::exception& e) {
    writer.write(state);
    throw CegpmiAborted(std::string("inference aborted: ") + e.what(), state, std::current_exception());
  };

  try {
    if (!resume) {
      for (const auto& id : cfg.scope()) {
        Experiment single{{id, 1}};
        state.exps.push_back({single, harness.cycles(single)});
      }
    }

    auto opts = cfg.session_options();
    opts.transcript_path = options.smt_log_path;
    smt::Session session(opts);

    std::optional<PortMapping> m1;
    while (true) {
      if (state.iterations >= options.max_iterations)
        throw std::runtime_error("iteration limit of " + std::to_string(options.max_iterations) + " reached");
      if (!m1) {
        m1 = find_mapping(state.exps, cfg, session);
        if (!m1) {
          // The observations do not fit the model at all.
          state.transcript.push_back({});
          writer.write(state);
          return {std::nullopt, state};
        }
      }

      CegpmiIteration it;
      it.m1 = m1;
      if (!state.final_stage) it.size_bound = state.size_bound;
      auto other = find_other_mapping(state.exps, *m1, cfg, it.size_bound, session);
      ++state.iterations;

      if (!other) {
        state.transcript.push_back(it);
        if (state.final_stage) {
          writer.write(state);
          return {m1, state};
        }
        if (state.size_bound >= n_insns)
          state.final_stage = true;
        else
          ++state.size_bound;
        writer.write(state);
        continue;
      }

      it.m2 = other->mapping;
      it.new_exp = other->experiment;
      if (state.has_experiment(other->experiment)) {
        // Already measured; escalate instead of looping on the same experiment.
        it.duplicate = true;
        state.transcript.push_back(it);
        if (state.final_stage) {
          writer.write(state);
          return {m1, state};
        }
        if (state.size_bound >= n_insns)
          state.final_stage = true;
        else
          ++state.size_bound;
        writer.write(state);
        continue;
      }

      const double cycles = harness.cycles(other->experiment);
      it.cycles = cycles;
      const auto size = experiment_size(other->experiment);
      const bool m1_fits = within_band(other->t_given, cycles, size, cfg.epsilon);
      const bool m2_fits = within_band(other->t_other, cycles, size, cfg.epsilon);
      if (m1_fits && m2_fits)
        throw std::logic_error("distinguishing experiment {" + other->experiment.key() + "} ruled out neither mapping");

      state.exps.push_back({other->experiment, cycles});
      state.transcript.push_back(it);
      writer.write(state);
      m1.reset();
    }
  } catch (const SolverTimeout& e) {
    abort_with(e);
  } catch (const SolverUnknown& e) {
    abort_with(e);
  } catch (const SolverProtocolError& e) {
    abort_with(e);
  } catch (const BackendFailure& e) {
    abort_with(e);
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const Error*>(&e) != nullptr) throw;
    abort_with(e);
  }
  throw std::logic_error("unreachable");
}

std::optional<PortMapping> infer_core_mapping(const std::vector<std::string>& insns, MeasurementBackend& backend,
                                              const SolverConfig& solver_cfg, const MeasureConfig& measure_cfg) {
  Harness harness(backend, measure_cfg);
  return run_cegpmi(insns, harness, solver_cfg).mapping;
}

}  // namespace pmwb
