#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pmwb/errors.hpp"
#include "pmwb/io.hpp"
#include "pmwb/mapping.hpp"
#include "support.hpp"

using namespace pmwb;
using pmwb::test::uop;

TEST_CASE("port sets behave like sets of small integers") {
  PortSet a{0, 2};
  PortSet b{0, 1, 2};
  CHECK(a.size() == 2);
  CHECK(a.contains(2));
  CHECK_FALSE(a.contains(1));
  CHECK(a.proper_subset_of(b));
  CHECK_FALSE(b.subset_of(a));
  CHECK((a | PortSet{1}) == b);
  CHECK((a & PortSet{2, 3}) == PortSet{2});
  CHECK(a.ports() == std::vector<unsigned>{0, 2});
  CHECK(PortSet::all(3) == b);
  CHECK(PortSet::all(16).size() == 16);
  CHECK_THROWS_AS(a.insert(16), std::out_of_range);
  // Ordered by cardinality first.
  CHECK(PortSet{3} < PortSet{0, 1});
}

TEST_CASE("port usage merges equal port sets and sorts entries") {
  PortUsage u({uop({0, 1}, 2), uop({1}), uop({0, 1})});
  REQUIRE(u.entries().size() == 2);
  CHECK(u.entries()[0] == uop({1}));
  CHECK(u.entries()[1] == uop({0, 1}, 3));
  CHECK(u.total() == 4);
  CHECK(u.multiplicity(PortSet{0, 1}) == 3);
  CHECK(u.multiplicity(PortSet{0}) == 0);
}

TEST_CASE("mapping validation") {
  PortMapping m(2);
  CHECK_THROWS_AS(m.set("x", PortUsage({uop({2})})), std::invalid_argument);
  CHECK_THROWS_AS(m.set("x", PortUsage({UopEntry{PortSet{}, 1}})), std::invalid_argument);
  m.set("x", PortUsage({uop({0}, 2)}), 1);
  CHECK(m.uops("x") == 1);
  CHECK_THROWS_AS(m.at("y"), UnknownInstruction);
  try {
    m.at("y");
  } catch (const UnknownInstruction& e) {
    CHECK(e.id() == "y");
  }
}

TEST_CASE("experiments are multisets with a stable key") {
  Experiment e{{"mul", 2}, {"fma", 1}};
  e.add("mul");
  e.add("add", 0);
  CHECK(e.key() == "fma:1,mul:3");
  CHECK(e.count("add") == 0);
  CHECK(experiment_size(e) == 4);
  CHECK(e.scaled(2).count("mul") == 6);
  CHECK(Experiment{{"a", 1}} < Experiment{{"b", 1}});
}

TEST_CASE("uop mass aggregates over instructions") {
  auto m = test::example_isa();
  auto mass = uop_mass(m, Experiment{{"fma", 1}, {"add", 6}});
  CHECK(mass[PortSet{0, 1}] == 8);
  CHECK(mass[PortSet{1}] == 1);
}

TEST_CASE("canonical port labels identify relabeled mappings") {
  auto m = test::example_isa();
  auto swapped = relabel_ports(m, {1, 0});
  CHECK_FALSE(swapped == m);
  CHECK(canonical_port_labels(swapped) == canonical_port_labels(m));
  CHECK(canonical_port_labels(test::split_ports()) != canonical_port_labels(test::shared_port()));

  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    PortMapping r(5);
    for (int i = 0; i < 4; ++i) {
      std::uniform_int_distribution<unsigned> bits(1, 31);
      r.set("i" + std::to_string(i), PortUsage({UopEntry{PortSet(static_cast<std::uint16_t>(bits(rng))), 1}}));
    }
    std::vector<unsigned> perm(5);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(canonical_port_labels(relabel_ports(r, perm)) == canonical_port_labels(r));
  }
}

TEST_CASE("mapping JSON round trip") {
  auto m = test::example_isa();
  m.set("div", PortUsage({uop({0}, 4)}), 1);
  auto j = mapping_to_json(m);
  CHECK(mapping_from_json(j) == m);
  CHECK(j["instructions"][0]["name"] == "add");
  CHECK(j["instructions"][1]["uop_count_override"] == 1);
  CHECK(load_mapping(test::data("example_isa.json")) == test::example_isa());
}

TEST_CASE("mapping JSON errors") {
  CHECK_THROWS_AS(mapping_from_json(parse_json(R"({"num_ports": 2})", "x")), FormatError);
  CHECK_THROWS_AS(
      mapping_from_json(parse_json(R"({"num_ports": 2, "instructions": [{"name": "a", "uops": [{"ports": [5]}]}]})", "x")),
      FormatError);
  CHECK_THROWS_AS(mapping_from_json(parse_json(
                      R"({"num_ports": 2, "instructions": [{"name": "a", "uops": [{"ports": [0]}]},
                                                            {"name": "a", "uops": [{"ports": [1]}]}]})",
                      "x")),
                  FormatError);
  try {
    parse_json("{\n  \"num_ports\": ,\n}", "bad.json");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_mapping("/nonexistent/mapping.json"), IoError);
}

TEST_CASE("experiments file round trip") {
  auto exps = load_experiments(test::data("example_experiments.json"));
  REQUIRE(exps.size() == 3);
  CHECK(exps[2] == Experiment{{"add", 6}, {"fma", 1}});
  CHECK(experiments_from_json(experiments_to_json(exps)) == exps);
  CHECK(load_experiments(test::data("empty_experiments.json")).empty());
  CHECK_THROWS_AS(counts_from_json(parse_json(R"({"a": -1})", "x")), FormatError);
}

TEST_CASE("decimal formatting and exact conversion") {
  CHECK(format_fixed(0.02) == "0.02");
  CHECK(format_fixed(4.5) == "4.5");
  CHECK(format_fixed(3.0) == "3");
  CHECK(std::stod(format_decimal(0.1)) == 0.1);
  CHECK(rational_from_decimal(0.02) == Rational(1, 50));
  CHECK(rational_from_decimal(4.5) == Rational(9, 2));
  CHECK(rational_from_decimal(3.0) == Rational(3));
}
