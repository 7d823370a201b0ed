#include <doctest.h>

#include <algorithm>
#include <random>

#include "pmwb/charmap.hpp"
#include "pmwb/eval.hpp"
#include "support.hpp"

using namespace pmwb;
using pmwb::test::uop;

namespace {

/// Blocking suite for the three-instruction example: add blocks {0,1}, mul blocks {1}.
BlockingSuite example_isa_suite() { return BlockingSuite({{"add", PortSet{0, 1}}, {"mul", PortSet{1}}}); }

/// Backend whose cycle count comes from a fixed function of the experiment.
class FunctionBackend : public MeasurementBackend {
public:
  explicit FunctionBackend(std::function<double(const Experiment&)> f) : f_(std::move(f)) {}
  RawSample raw_measure(const Experiment& e, std::uint64_t) override { return {f_(e), experiment_size(e)}; }

private:
  std::function<double(const Experiment&)> f_;
};

}  // namespace

TEST_CASE("compute_k follows the production formula") {
  CHECK(compute_k(1, 3, 1.5) == 10);
  CHECK(compute_k(2, 3, 1.5) == 10);
  CHECK(compute_k(2, 10, 1.0) == 20);
  CHECK(compute_k(3, 1, 8.0) == 48);    // 2 * |pu| * floor(tp)
  CHECK(compute_k(4, 1, 30.0) == 100);  // capped
  CHECK(compute_k(2, 50, 1.0) == 100);
  CHECK_THROWS_AS(compute_k(4, 30, 30.0), KTooLarge);
  CHECK_THROWS_AS(compute_k(0, 1, 1.0), std::invalid_argument);
  CHECK(compute_k(1, 3, 1.5, true) == 3);
  CHECK(compute_k(2, 3, 1.5, true) == 6);
}

TEST_CASE("surplus of the three-μop instruction against each blocker") {
  SimulatedBackend backend(test::example_isa(), {});
  Harness harness(backend, {});
  const auto suite = example_isa_suite();
  CharmapConfig cfg;
  const SuiteEntry mul{"mul", PortSet{1}}, add{"add", PortSet{0, 1}};
  // Didactic k values: |pu| * uops.
  CHECK(count_blocked_uops("fma", mul, 3, suite, harness, cfg) == 1);
  CHECK(count_blocked_uops("fma", add, 6, suite, harness, cfg) == 3);
  // Production k values.
  CHECK(count_blocked_uops("fma", mul, 10, suite, harness, cfg) == 1);
  CHECK(count_blocked_uops("fma", add, 10, suite, harness, cfg) == 3);
  CHECK(count_blocked_uops("add", mul, 10, suite, harness, cfg) == 0);
}

TEST_CASE("characterize subtracts μops already found on smaller port sets") {
  SimulatedBackend backend(test::example_isa(), {});
  Harness harness(backend, {});
  const auto suite = example_isa_suite();
  for (bool didactic : {false, true}) {
    CharmapConfig cfg;
    cfg.didactic_k = didactic;
    const auto c = characterize("fma", suite, harness, cfg);
    CHECK(c.usage == test::example_isa().usage("fma"));
    CHECK(c.measured_uops == 3);
    CHECK_FALSE(c.partial);
  }
}

TEST_CASE("blocking instructions characterize to themselves") {
  SimulatedBackend backend(test::example_isa(), {});
  Harness harness(backend, {});
  const auto suite = example_isa_suite();
  CHECK(characterize("add", suite, harness, {}).usage == test::example_isa().usage("add"));
  CHECK(characterize("mul", suite, harness, {}).usage == test::example_isa().usage("mul"));
}

TEST_CASE("suite ordering does not change the result") {
  SimulatedBackend backend(test::example_isa(), {});
  Harness harness(backend, {});
  const BlockingSuite a({{"mul", PortSet{1}}, {"add", PortSet{0, 1}}});
  const BlockingSuite b({{"add", PortSet{0, 1}}, {"mul", PortSet{1}}});
  CHECK(a.entries() == b.entries());
  CHECK(a.entries().front().blocker == "mul");
  CHECK(characterize("fma", a, harness, {}).usage == characterize("fma", b, harness, {}).usage);
}

TEST_CASE("suite construction") {
  CHECK_THROWS_AS(BlockingSuite({{"x", PortSet{0}}, {"y", PortSet{0}}}), std::invalid_argument);
  CHECK_THROWS_AS(BlockingSuite({{"x", PortSet{}}}), std::invalid_argument);
  const auto s = BlockingSuite::from_core_mapping(test::split_ports());
  CHECK(s.entries().size() == 2);
  CHECK(s.covers(PortSet{1}));
  CHECK_FALSE(s.covers(PortSet{0, 1}));
  CHECK(BlockingSuite::from_core_mapping(test::split_ports(), {"iA"}).entries().size() == 1);
}

TEST_CASE("random blockable mappings round-trip through characterization") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const unsigned ports = 2 + static_cast<unsigned>(seed % 5);
    const auto inst = gen_blockable_mapping(5, ports, 3, seed);
    SimulatedBackend backend(inst.mapping, {});
    Harness harness(backend, {});
    const BlockingSuite suite(inst.suite);
    const auto report = characterize_all(inst.mapping.ids(), suite, harness, {});
    CHECK(report.excluded.empty());
    for (const auto& id : inst.mapping.ids()) {
      REQUIRE(report.results.count(id));
      CHECK(report.results.at(id).usage == inst.mapping.usage(id));
      CHECK_FALSE(report.results.at(id).partial);
    }
  }
}

TEST_CASE("majority voting with measurement noise") {
  SimConfig sim;
  sim.noise_rel_std = 0.005;
  sim.rng_seed = 3;
  SimulatedBackend backend(test::example_isa(), sim);
  Harness harness(backend, {});
  CharmapConfig cfg;
  cfg.votes = 3;
  const auto report = characterize_all({"fma", "add"}, example_isa_suite(), harness, cfg);
  REQUIRE(report.results.count("fma"));
  CHECK(report.results.at("fma").usage == test::example_isa().usage("fma"));
  CHECK(harness.epoch() == 0);
  CHECK(harness.backend_runs() > 3);

  cfg.votes = 2;
  CHECK_THROWS_AS(characterize_all({"fma"}, example_isa_suite(), harness, cfg), std::invalid_argument);
}

TEST_CASE("instructions with too many μops are excluded") {
  PortMapping m(2);
  m.set("b01", PortUsage({uop({0, 1})}));
  m.set("huge", PortUsage({uop({0, 1}, 60)}));
  SimulatedBackend backend(m, {});
  Harness harness(backend, {});
  const auto report = characterize_all({"huge", "b01"}, BlockingSuite({{"b01", PortSet{0, 1}}}), harness, {});
  CHECK(report.results.count("b01"));
  REQUIRE(report.excluded.size() == 1);
  CHECK(report.excluded[0].id == "huge");
  CHECK(report.excluded[0].reason.find("more than 100") != std::string::npos);
  CHECK(report.excluded[0].runs.size() == 1);
}

TEST_CASE("a measured slowdown below the baseline is a negative surplus") {
  // Adding the instruction makes the block faster than the blockers alone.
  FunctionBackend backend([](const Experiment& e) {
    const double b = e.count("b");
    return e.count("x") ? std::max(1.0, b - 1.0) : std::max(1.0, b);
  });
  Harness harness(backend, {});
  const BlockingSuite suite({{"b", PortSet{0}}});
  CHECK_THROWS_AS(count_blocked_uops("x", suite.entries()[0], 10, suite, harness, {}), NegativeSurplus);
  const auto report = characterize_all({"x"}, suite, harness, {});
  REQUIRE(report.excluded.size() == 1);
  CHECK(report.excluded[0].runs[0].contains("error"));
}

TEST_CASE("a surplus far from an integer is rejected") {
  FunctionBackend backend([](const Experiment& e) { return e.count("b") + (e.count("x") ? 0.5 : 0.0); });
  Harness harness(backend, {});
  const BlockingSuite suite({{"b", PortSet{0}}});
  CHECK_THROWS_AS(count_blocked_uops("x", suite.entries()[0], 10, suite, harness, {}), NonIntegralSurplus);
}

TEST_CASE("μops on ports without a blocker make the result partial") {
  PortMapping m(3);
  m.set("b0", PortUsage({uop({0})}));
  m.set("x", PortUsage({uop({0}), uop({1, 2})}));
  SimulatedBackend backend(m, {});
  Harness harness(backend, {});
  const auto report = characterize_all({"x"}, BlockingSuite({{"b0", PortSet{0}}}), harness, {});
  REQUIRE(report.results.count("x"));
  const auto& c = report.results.at("x");
  CHECK(c.partial);
  CHECK(c.usage == PortUsage({uop({0})}));
  CHECK(c.measured_uops == 2);

  // Extra μops that never reach a port show up the same way.
  PortMapping o(1);
  o.set("b0", PortUsage({uop({0})}));
  o.set("y", PortUsage({uop({0})}), 3);
  SimulatedBackend ob(o, {});
  Harness oh(ob, {});
  const auto r2 = characterize_all({"y"}, BlockingSuite({{"b0", PortSet{0}}}), oh, {});
  CHECK(r2.results.at("y").partial);
  CHECK(r2.results.at("y").measured_uops == 3);
}

TEST_CASE("report JSON round trip") {
  CharacterizationReport r;
  r.results["fma"] = {test::example_isa().usage("fma"), 3, false};
  r.results["x"] = {PortUsage({uop({0})}), 2, true};
  r.excluded.push_back({"huge", "too big", nlohmann::json::array({{{"error", "too big"}}})});
  const auto j = report_to_json(r);
  CHECK(j["results"]["x"]["partial"] == true);
  CHECK_FALSE(j["results"]["fma"].contains("partial"));
  const auto back = report_from_json(j, 2);
  CHECK(back.results.at("fma").usage == r.results.at("fma").usage);
  CHECK(back.results.at("x").partial);
  CHECK(back.excluded.at(0).reason == "too big");
  CHECK(report_mapping(back, 2).ids() == std::vector<std::string>{"fma", "x"});
  CHECK_THROWS_AS(report_from_json(nlohmann::json::object(), 2), FormatError);
}
