#include "pmwb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "pmwb/errors.hpp"
#include "pmwb/io.hpp"
#include "pmwb/vcpu.hpp"

namespace pmwb {

namespace {

std::string numbered(const std::string& stem, unsigned i, unsigned count) {
  auto digits = std::to_string(count > 0 ? count - 1 : 0).size();
  auto n = std::to_string(i);
  return stem + std::string(digits - n.size(), '0') + n;
}

PortSet random_port_set(std::mt19937_64& rng, unsigned n_ports) {
  std::uniform_int_distribution<unsigned> bits(1, (1u << n_ports) - 1u);
  return PortSet(static_cast<std::uint16_t>(bits(rng)));
}

}  // namespace

PortMapping gen_random_mapping(unsigned n_insns, unsigned n_ports, unsigned max_uops, std::uint64_t seed) {
  if (n_insns == 0 || n_ports == 0 || max_uops == 0) throw std::invalid_argument("arguments must be positive");
  if (n_ports > kMaxPorts) throw std::invalid_argument("at most 16 ports");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<unsigned> uop_count(1, max_uops);
  PortMapping m(n_ports);
  for (unsigned i = 0; i < n_insns; ++i) {
    std::vector<UopEntry> uops;
    const unsigned n = uop_count(rng);
    for (unsigned u = 0; u < n; ++u) uops.push_back({random_port_set(rng, n_ports), 1});
    m.set(numbered("i", i, n_insns), PortUsage(std::move(uops)));
  }
  return m;
}

BlockableInstance gen_blockable_mapping(unsigned n_insns, unsigned n_ports, unsigned max_uops, std::uint64_t seed) {
  BlockableInstance inst;
  inst.mapping = gen_random_mapping(n_insns, n_ports, max_uops, seed);
  inst.characterized = inst.mapping.ids();
  std::set<PortSet> used;
  for (const auto& [_, insn] : inst.mapping.instructions())
    for (const auto& e : insn.usage.entries()) used.insert(e.ports);
  unsigned b = 0;
  for (PortSet s : used) {
    auto id = numbered("b", b++, static_cast<unsigned>(used.size()));
    inst.mapping.set(id, PortUsage({UopEntry{s, 1}}));
    inst.suite.push_back({id, s});
  }
  return inst;
}

std::vector<Experiment> gen_random_blocks(const std::vector<std::string>& insns, std::size_t count,
                                          std::uint32_t block_size, std::uint64_t seed) {
  if (insns.empty()) throw std::invalid_argument("no instructions to sample from");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, insns.size() - 1);
  std::vector<Experiment> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    Experiment e;
    for (std::uint32_t k = 0; k < block_size; ++k) e.add(insns[pick(rng)]);
    out.push_back(std::move(e));
  }
  return out;
}

IpcPrediction predict_ipc_both(const PortMapping& m, const Experiment& e, const std::optional<Rational>& r_max) {
  if (e.empty()) throw std::invalid_argument("cannot predict the empty experiment");
  const Rational tp = bottleneck_throughput(m, e);
  if (tp.numerator() == 0) throw ZeroThroughputModel("model predicts zero cycles for {" + e.key() + "}");
  const auto size = static_cast<std::int64_t>(experiment_size(e));
  const Rational clipped = clip_throughput(tp, static_cast<std::uint64_t>(size), r_max);
  return {to_double(Rational(size) / clipped), to_double(Rational(size) / tp)};
}

double predict_ipc(const PortMapping& m, const Experiment& e, const std::optional<Rational>& r_max) {
  return predict_ipc_both(m, e, r_max).clipped;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  std::int64_t concordant = 0, discordant = 0, ties_x = 0, ties_y = 0, pairs = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++pairs;
      const bool tx = x[i] == x[j], ty = y[i] == y[j];
      if (tx) ++ties_x;
      if (ty) ++ties_y;
      if (tx || ty) continue;
      if ((x[i] < x[j]) == (y[i] < y[j]))
        ++concordant;
      else
        ++discordant;
    }
  }
  const double denom = std::sqrt(static_cast<double>(pairs - ties_x) * static_cast<double>(pairs - ties_y));
  if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(concordant - discordant) / denom;
}

AccuracyReport metrics(const std::vector<double>& pred, const std::vector<double>& meas) {
  if (pred.size() != meas.size()) throw std::invalid_argument("prediction and measurement counts differ");
  if (pred.size() < 2) throw std::invalid_argument("need at least two samples");
  AccuracyReport r;
  r.n = pred.size();
  double sum = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    if (!(meas[i] > 0)) throw std::invalid_argument("measurements must be positive");
    sum += std::abs(pred[i] - meas[i]) / meas[i];
  }
  r.mape = sum / static_cast<double>(r.n) * 100.0;
  r.pcc = pearson(pred, meas);
  r.kendall_tau = kendall_tau_b(pred, meas);
  r.degenerate = std::isnan(r.pcc) || std::isnan(r.kendall_tau);
  return r;
}

nlohmann::json accuracy_to_json(const AccuracyReport& r) {
  auto value = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"mape", value(r.mape)}, {"pcc", value(r.pcc)}, {"kendall_tau", value(r.kendall_tau)}, {"n", r.n}};
  if (r.degenerate) j["degenerate"] = true;
  return j;
}

std::optional<Experiment> observational_equivalence(const PortMapping& m1, const PortMapping& m2,
                                                    const std::optional<Rational>& r_max, std::uint32_t max_size,
                                                    double epsilon) {
  const auto ids = m1.ids();
  if (ids != m2.ids()) throw ScopeMismatch("the mappings cover different instructions");
  const Rational eps = rational_from_decimal(epsilon);
  std::optional<Experiment> witness;
  for_each_experiment(ids, max_size, [&](const Experiment& e) {
    const Rational t1 = clipped_throughput(m1, e, r_max);
    const Rational t2 = clipped_throughput(m2, e, r_max);
    const Rational diff = t1 > t2 ? t1 - t2 : t2 - t1;
    if (diff > Rational(2) * eps * static_cast<std::int64_t>(experiment_size(e))) {
      witness = e;
      return false;
    }
    return true;
  });
  return witness;
}

std::string heatmap_csv(const std::vector<double>& pred, const std::vector<double>& meas, double bucket_width) {
  if (pred.size() != meas.size()) throw std::invalid_argument("prediction and measurement counts differ");
  if (!(bucket_width > 0)) throw std::invalid_argument("bucket width must be positive");
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> counts;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto bucket = [&](double x) { return static_cast<std::int64_t>(std::floor(x / bucket_width)); };
    ++counts[{bucket(meas[i]), bucket(pred[i])}];
  }
  std::string out = "measured_bucket,predicted_bucket,count\n";
  for (const auto& [key, n] : counts)
    out += std::to_string(key.first) + "," + std::to_string(key.second) + "," + std::to_string(n) + "\n";
  return out;
}

void heatmap_export(const std::vector<double>& pred, const std::vector<double>& meas, double bucket_width,
                    const std::filesystem::path& path) {
  write_text_file(path, heatmap_csv(pred, meas, bucket_width));
}

IpcSamples collect_ipc(const PortMapping& model, Harness& harness, const std::vector<Experiment>& blocks,
                       const std::optional<Rational>& r_max, bool clip) {
  IpcSamples s;
  for (const auto& e : blocks) {
    auto p = predict_ipc_both(model, e, r_max);
    s.predicted.push_back(clip ? p.clipped : p.unclipped);
    const double cycles = harness.cycles(e);
    if (!(cycles > 0)) throw BackendFailure("measured zero cycles for {" + e.key() + "}");
    s.measured.push_back(static_cast<double>(experiment_size(e)) / cycles);
  }
  return s;
}

}  // namespace pmwb
