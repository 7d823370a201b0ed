#include <doctest.h>

#include <filesystem>
#include <set>

#include "pmwb/cegpmi.hpp"
#include "pmwb/eval.hpp"
#include "pmwb/io.hpp"
#include "pmwb/vcpu.hpp"
#include "support.hpp"

using namespace pmwb;
using pmwb::test::uop;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "pmwb_cegpmi_tests";
  fs::create_directories(dir);
  return dir / name;
}

/// Every experiment in Exps is reproduced within epsilon * |e|.
void check_reproduces(const PortMapping& m, const CegpmiState& state, const SolverConfig& cfg) {
  for (const auto& o : state.exps)
    CHECK(std::abs(to_double(clipped_throughput(m, o.experiment, cfg.r_max)) - o.cycles) <
          cfg.epsilon * static_cast<double>(experiment_size(o.experiment)));
}

void check_transcript_invariants(const CegpmiState& state) {
  std::set<Experiment> seen;
  for (const auto& o : state.exps) CHECK(seen.insert(o.experiment).second);
  auto fits = [](const PortMapping& m, const Experiment& e, double cycles) {
    return std::abs(to_double(bottleneck_throughput(m, e)) - cycles) < 0.02 * static_cast<double>(experiment_size(e));
  };
  // A mapping ruled out by an observation is never proposed again.
  std::vector<PortMapping> ruled_out;
  for (const auto& it : state.transcript) {
    for (const auto& r : ruled_out) {
      if (it.m1) CHECK_FALSE(r == *it.m1);
      if (it.m2) CHECK_FALSE(r == *it.m2);
    }
    if (!it.m2 || it.duplicate) continue;
    REQUIRE(it.cycles);
    const bool m1_fits = fits(*it.m1, *it.new_exp, *it.cycles);
    const bool m2_fits = fits(*it.m2, *it.new_exp, *it.cycles);
    CHECK_FALSE((m1_fits && m2_fits));
    if (!m1_fits) ruled_out.push_back(*it.m1);
    if (!m2_fits) ruled_out.push_back(*it.m2);
  }
}

}  // namespace

TEST_CASE("two-instruction example finds the pair experiment") {
  SimulatedBackend backend(test::split_ports(), {});
  Harness harness(backend, {});
  const auto cfg = test::solver_config_for(test::split_ports());
  CegpmiOptions options;
  options.transcript_path = scratch("pair_transcript.jsonl");
  auto result = run_cegpmi({"iA", "iB"}, harness, cfg, options);
  REQUIRE(result.mapping);
  CHECK_FALSE(observational_equivalence(*result.mapping, test::split_ports(), std::nullopt, 4));
  bool found_pair = false;
  for (const auto& it : result.state.transcript)
    if (it.new_exp && *it.new_exp == Experiment{{"iA", 1}, {"iB", 1}}) found_pair = true;
  CHECK(found_pair);
  check_reproduces(*result.mapping, result.state, cfg);
  check_transcript_invariants(result.state);

  // The transcript file has one JSON object per iteration.
  const auto text = read_text_file(*options.transcript_path);
  std::size_t lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == result.state.transcript.size());
  CHECK(text.find("\"newExp\":{\"iA\":1,\"iB\":1}") != std::string::npos);
}

TEST_CASE("a single instruction on one port needs no counter-example") {
  PortMapping truth(1);
  truth.set("only", PortUsage({uop({0})}));
  SimulatedBackend backend(truth, {});
  Harness harness(backend, {});
  auto result = run_cegpmi({"only"}, harness, test::solver_config_for(truth));
  REQUIRE(result.mapping);
  CHECK(*result.mapping == truth);
  for (const auto& it : result.state.transcript) CHECK_FALSE(it.m2);
  CHECK(result.state.exps.size() == 1);
}

TEST_CASE("random single-μop ground truths are recovered up to equivalence") {
  for (std::uint64_t seed = 100; seed < 106; ++seed) {
    const unsigned ports = 2 + static_cast<unsigned>(seed % 3);
    const auto truth = gen_random_mapping(4, ports, 1, seed);
    SimulatedBackend backend(truth, {});
    Harness harness(backend, {});
    const auto cfg = test::solver_config_for(truth);
    auto result = run_cegpmi(truth.ids(), harness, cfg);
    REQUIRE(result.mapping);
    CHECK_FALSE(observational_equivalence(*result.mapping, truth, std::nullopt, 5));
    check_reproduces(*result.mapping, result.state, cfg);
    check_transcript_invariants(result.state);
  }
}

TEST_CASE("inconsistent observations yield no mapping") {
  // Reports a throughput no single-μop mapping can produce.
  class OddBackend : public MeasurementBackend {
  public:
    RawSample raw_measure(const Experiment& e, std::uint64_t) override {
      return {0.7 * static_cast<double>(experiment_size(e)), experiment_size(e)};
    }
  } backend;
  Harness harness(backend, {});
  SolverConfig cfg;
  cfg.n_ports = 2;
  cfg.solver_command = test::solver_command();
  cfg.port_counts = {{"x", 1}};
  auto result = run_cegpmi({"x"}, harness, cfg);
  CHECK_FALSE(result.mapping);
}

TEST_CASE("state survives a JSON round trip") {
  CegpmiState s;
  s.insns = {"iA", "iB"};
  s.exps = {{Experiment{{"iA", 1}}, 1.0}, {Experiment{{"iA", 1}, {"iB", 1}}, 2.0}};
  s.size_bound = 2;
  s.final_stage = true;
  s.iterations = 3;
  CegpmiIteration it;
  it.m1 = test::shared_port();
  it.m2 = test::split_ports();
  it.new_exp = Experiment{{"iA", 1}, {"iB", 1}};
  it.cycles = 1.0;
  it.size_bound = 2;
  s.transcript = {it, CegpmiIteration{}};
  auto back = state_from_json(state_to_json(s));
  CHECK(back.insns == s.insns);
  CHECK(back.exps == s.exps);
  CHECK(back.size_bound == 2);
  CHECK(back.final_stage);
  CHECK(back.iterations == 3);
  REQUIRE(back.transcript.size() == 2);
  CHECK(*back.transcript[0].m2 == test::split_ports());
  CHECK(*back.transcript[0].new_exp == *it.new_exp);
  CHECK_FALSE(back.transcript[1].m1);
  CHECK_THROWS_AS(state_from_json(nlohmann::json{{"schema", "other"}}), FormatError);
}

TEST_CASE("a solver failure aborts with resumable state") {
  SimulatedBackend backend(test::split_ports(), {});
  Harness harness(backend, {});
  auto cfg = test::solver_config_for(test::split_ports());
  cfg.solver_command = "sleep 30";
  cfg.timeout = std::chrono::milliseconds(200);
  CegpmiOptions options;
  options.state_path = scratch("aborted_state.json");
  fs::remove(*options.state_path);
  CegpmiState saved;
  try {
    run_cegpmi({"iA", "iB"}, harness, cfg, options);
    FAIL("expected CegpmiAborted");
  } catch (const CegpmiAborted& e) {
    saved = e.state();
    CHECK(std::string(e.what()).find("did not answer") != std::string::npos);
    CHECK_THROWS_AS(std::rethrow_exception(e.cause()), SolverTimeout);
  }
  CHECK(saved.exps.size() == 2);
  REQUIRE(fs::exists(*options.state_path));
  const auto from_disk = state_from_json(read_json_file(*options.state_path));
  CHECK(from_disk.exps == saved.exps);

  // Resume with a working solver; the seeded observations are reused.
  cfg.solver_command = test::solver_command();
  cfg.timeout = std::chrono::milliseconds(60000);
  const auto runs_before = harness.backend_runs();
  auto result = run_cegpmi({"iA", "iB"}, harness, cfg, options, from_disk);
  REQUIRE(result.mapping);
  CHECK_FALSE(observational_equivalence(*result.mapping, test::split_ports(), std::nullopt, 4));
  CHECK(harness.backend_runs() == runs_before + 1);  // only the pair experiment is new
}

TEST_CASE("backend failures abort too") {
  class Broken : public MeasurementBackend {
  public:
    RawSample raw_measure(const Experiment&, std::uint64_t) override { throw std::runtime_error("no counters"); }
  } backend;
  Harness harness(backend, {});
  try {
    run_cegpmi({"iA", "iB"}, harness, test::solver_config_for(test::split_ports()));
    FAIL("expected CegpmiAborted");
  } catch (const CegpmiAborted& e) {
    CHECK_THROWS_AS(std::rethrow_exception(e.cause()), BackendFailure);
  }
}

TEST_CASE("instructions need port-count facts") {
  SimulatedBackend backend(test::split_ports(), {});
  Harness harness(backend, {});
  auto cfg = test::solver_config_for(test::split_ports());
  cfg.port_counts.erase("iB");
  CHECK_THROWS_AS(run_cegpmi({"iA", "iB"}, harness, cfg), EncodingError);
  CHECK_THROWS_AS(run_cegpmi({}, harness, cfg), std::invalid_argument);
}
