#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pmwb/eval.hpp"
#include "pmwb/vcpu.hpp"
#include "support.hpp"

using namespace pmwb;
using pmwb::test::uop;

namespace {

int sign(double v) { return (v > 0) - (v < 0); }

/// tau-b as the normalized sum of sign products, independent of the
/// concordant/discordant counting used by the library.
double tau_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  double num = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i == j) continue;
      const int a = sign(x[i] - x[j]), b = sign(y[i] - y[j]);
      num += a * b;
      sx += a * a;
      sy += b * b;
    }
  return num / std::sqrt(sx * sy);
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("random mappings are deterministic and well formed") {
  const auto a = gen_random_mapping(12, 5, 3, 42);
  CHECK(a == gen_random_mapping(12, 5, 3, 42));
  CHECK_FALSE(a == gen_random_mapping(12, 5, 3, 43));
  CHECK(a.ids().size() == 12);
  CHECK(a.ids().front() == "i00");
  CHECK(a.n_ports() == 5);
  for (const auto& [id, insn] : a.instructions()) {
    CHECK(insn.usage.total() >= 1);
    CHECK(insn.usage.total() <= 3);
  }
  CHECK_THROWS_AS(gen_random_mapping(0, 2, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_random_mapping(2, 17, 1, 0), std::invalid_argument);
}

TEST_CASE("blockable instances have one blocker per used port set") {
  const auto inst = gen_blockable_mapping(6, 4, 2, 9);
  std::set<PortSet> used;
  for (const auto& id : inst.characterized)
    for (const auto& e : inst.mapping.usage(id).entries()) used.insert(e.ports);
  std::set<PortSet> blocked;
  for (const auto& s : inst.suite) {
    CHECK(inst.mapping.usage(s.blocker) == PortUsage({{s.ports, 1}}));
    blocked.insert(s.ports);
  }
  CHECK(used == blocked);
  CHECK(inst.characterized.size() == 6);
  CHECK(inst.mapping.ids().size() == 6 + inst.suite.size());
}

TEST_CASE("random blocks") {
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto blocks = gen_random_blocks(ids, 50, 5, 1);
  CHECK(blocks.size() == 50);
  for (const auto& e : blocks) CHECK(experiment_size(e) == 5);
  CHECK(blocks == gen_random_blocks(ids, 50, 5, 1));
  CHECK_THROWS_AS(gen_random_blocks({}, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("IPC prediction") {
  CHECK(predict_ipc(test::example_isa(), Experiment{{"add", 1}, {"mul", 1}}, std::nullopt) == doctest::Approx(2.0));
  CHECK(predict_ipc(test::example_isa(), Experiment{{"fma", 1}}, std::nullopt) == doctest::Approx(1.0 / 1.5));

  PortMapping wide(4);
  wide.set("i", PortUsage({uop({0, 1, 2, 3})}));
  const Experiment eight{{"i", 8}};
  CHECK(predict_ipc(wide, eight, Rational(5)) == doctest::Approx(4.0));
  CHECK(predict_ipc(wide, eight, Rational(2)) == doctest::Approx(2.0));
  auto both = predict_ipc_both(wide, eight, Rational(2));
  CHECK(both.unclipped == doctest::Approx(4.0));

  // Eight ports with r_max 5: the 5/|e| branch decides.
  PortMapping eight_ports(8);
  eight_ports.set("i", PortUsage({uop({0, 1, 2, 3, 4, 5, 6, 7})}));
  CHECK(predict_ipc(eight_ports, Experiment{{"i", 10}}, Rational(5)) == doctest::Approx(5.0));
  CHECK(predict_ipc(eight_ports, Experiment{{"i", 10}}, std::nullopt) == doctest::Approx(8.0));

  PortMapping empty(1);
  empty.set("nop", PortUsage{});
  CHECK_THROWS_AS(predict_ipc(empty, Experiment{{"nop", 1}}, std::nullopt), ZeroThroughputModel);
  CHECK_THROWS_AS(predict_ipc(wide, Experiment{}, std::nullopt), std::invalid_argument);
}

TEST_CASE("metric examples") {
  auto id = metrics({1, 2, 3}, {1, 2, 3});
  CHECK(id.mape == doctest::Approx(0.0));
  CHECK(id.pcc == doctest::Approx(1.0));
  CHECK(id.kendall_tau == doctest::Approx(1.0));
  CHECK(id.n == 3);
  CHECK_FALSE(id.degenerate);

  auto swapped = metrics({1, 2, 3}, {1, 3, 2});
  CHECK(swapped.kendall_tau == doctest::Approx(1.0 / 3.0));
  CHECK(swapped.kendall_tau == doctest::Approx(tau_oracle({1, 2, 3}, {1, 3, 2})));

  auto doubled = metrics({2, 4}, {1, 2});
  CHECK(doubled.mape == doctest::Approx(100.0));
  CHECK(doubled.pcc == doctest::Approx(1.0));

  auto flat = metrics({1, 1, 1}, {1, 2, 3});
  CHECK(flat.degenerate);
  CHECK(std::isnan(flat.pcc));
  CHECK(std::isnan(flat.kendall_tau));
  const auto j = accuracy_to_json(flat);
  CHECK(j["pcc"].is_null());
  CHECK(j["kendall_tau"].is_null());
  CHECK(j["degenerate"] == true);

  CHECK_THROWS_AS(metrics({1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(metrics({1, 2}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(metrics({1, 2}, {0, 1}), std::invalid_argument);
}

TEST_CASE("metrics agree with independent formulas on random data") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(1, 6);  // small range so ties occur
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(15), y(15);
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = d(rng);
    if (std::set<double>(x.begin(), x.end()).size() < 2 || std::set<double>(y.begin(), y.end()).size() < 2) continue;
    CHECK(kendall_tau_b(x, y) == doctest::Approx(tau_oracle(x, y)));
    CHECK(pearson(x, y) == doctest::Approx(pearson_oracle(x, y)));
    double mape = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mape += std::abs(x[i] - y[i]) / y[i];
    CHECK(metrics(x, y).mape == doctest::Approx(100.0 * mape / 15.0));
  }
}

TEST_CASE("metric invariances") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  std::vector<double> p(30), m(30);
  for (auto& v : p) v = u(rng);
  for (auto& v : m) v = u(rng);
  const auto base = metrics(p, m);

  // Joint permutation changes nothing.
  std::vector<std::size_t> idx(30);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> pp, mm;
  for (auto i : idx) {
    pp.push_back(p[i]);
    mm.push_back(m[i]);
  }
  const auto perm = metrics(pp, mm);
  CHECK(perm.mape == doctest::Approx(base.mape));
  CHECK(perm.pcc == doctest::Approx(base.pcc));
  CHECK(perm.kendall_tau == doctest::Approx(base.kendall_tau));

  // Monotone transforms keep tau; affine maps keep PCC.
  std::vector<double> cubed, affine;
  for (double v : p) {
    cubed.push_back(v * v * v);
    affine.push_back(3 * v + 1);
  }
  CHECK(kendall_tau_b(cubed, m) == doctest::Approx(base.kendall_tau));
  CHECK(pearson(affine, m) == doctest::Approx(base.pcc));
  CHECK(base.pcc >= -1.0);
  CHECK(base.pcc <= 1.0);
}

TEST_CASE("observational equivalence") {
  auto w = observational_equivalence(test::split_ports(), test::shared_port(), std::nullopt, 2);
  REQUIRE(w);
  CHECK(*w == Experiment{{"iA", 1}, {"iB", 1}});
  CHECK_FALSE(observational_equivalence(test::split_ports(), test::shared_port(), std::nullopt, 1));
  CHECK_FALSE(observational_equivalence(test::example_isa(), test::example_isa(), std::nullopt, 4));

  // Relabelled ports are indistinguishable.
  PortMapping swapped(2);
  swapped.set("iA", PortUsage({uop({1})}));
  swapped.set("iB", PortUsage({uop({0})}));
  CHECK_FALSE(observational_equivalence(test::split_ports(), swapped, std::nullopt, 4));

  // An IPC ceiling of 1/2 clips every block to 2|e| cycles; the pair no longer separates them.
  CHECK_FALSE(observational_equivalence(test::split_ports(), test::shared_port(), Rational(1, 2), 2));

  CHECK_THROWS_AS(observational_equivalence(test::split_ports(), test::example_isa(), std::nullopt, 2), ScopeMismatch);
}

TEST_CASE("experiment enumeration order") {
  std::vector<std::string> seen;
  for_each_experiment({"a", "b", "c"}, 2, [&](const Experiment& e) {
    seen.push_back(e.key());
    return true;
  });
  // 3 of size one, 6 of size two.
  REQUIRE(seen.size() == 9);
  CHECK(seen[0] == Experiment{{"a", 1}}.key());
  CHECK(seen[3] == Experiment{{"a", 2}}.key());
  CHECK(seen[4] == Experiment{{"a", 1}, {"b", 1}}.key());
  CHECK(seen[8] == Experiment{{"c", 2}}.key());
  std::size_t count = 0;
  for_each_experiment({"a", "b"}, 5, [&](const Experiment&) { return ++count < 4; });
  CHECK(count == 4);
}

TEST_CASE("heatmap buckets") {
  CHECK(heatmap_csv({0.5}, {0.6}, 0.25) == "measured_bucket,predicted_bucket,count\n2,2,1\n");
  CHECK(heatmap_csv({}, {}, 0.25) == "measured_bucket,predicted_bucket,count\n");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 4.0);
  std::vector<double> p(200), m(200);
  for (auto& v : p) v = u(rng);
  for (auto& v : m) v = u(rng);
  std::istringstream in(heatmap_csv(p, m, 0.25));
  std::string line;
  std::getline(in, line);
  std::size_t total = 0;
  while (std::getline(in, line)) total += std::stoul(line.substr(line.rfind(',') + 1));
  CHECK(total == 200);
  CHECK_THROWS_AS(heatmap_csv({1}, {1}, 0), std::invalid_argument);
}

TEST_CASE("collecting IPC samples against the simulator") {
  SimulatedBackend backend(test::example_isa(), {});
  Harness harness(backend, {});
  const auto blocks = gen_random_blocks(test::example_isa().ids(), 40, 4, 2);
  const auto s = collect_ipc(test::example_isa(), harness, blocks, std::nullopt);
  REQUIRE(s.predicted.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) CHECK(s.predicted[i] == doctest::Approx(s.measured[i]));
  const auto r = metrics(s.predicted, s.measured);
  CHECK(r.mape == doctest::Approx(0.0));
}
