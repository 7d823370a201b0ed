#include "pmwb/solver.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <stdexcept>

#include "pmwb/errors.hpp"
#include "pmwb/io.hpp"
#include "pmwb/vcpu.hpp"

namespace pmwb {

using smt::real_literal;

std::vector<std::string> SolverConfig::scope() const {
  std::set<std::string> ids;
  for (const auto& [id, _] : port_counts) ids.insert(id);
  for (const auto& b : improper_blockers) ids.insert(b.id);
  return {ids.begin(), ids.end()};
}

smt::SessionOptions SolverConfig::session_options() const {
  smt::SessionOptions opts;
  opts.command = solver_command;
  opts.timeout = timeout;
  return opts;
}

// ---------------------------------------------------------------------------
// Script

void Script::declare(const std::string& name, const std::string& sort) {
  commands_.push_back("(declare-fun " + name + " () " + sort + ")");
}

void Script::assert_that(const std::string& term) { commands_.push_back("(assert " + term + ")"); }

std::string Script::fresh(const std::string& stem) { return stem + std::to_string(counters_[stem]++); }

namespace {

std::string sum(const std::vector<std::string>& terms, const std::string& zero) {
  if (terms.empty()) return zero;
  if (terms.size() == 1) return terms.front();
  std::string out = "(+";
  for (const auto& t : terms) out += " " + t;
  return out + ")";
}

std::string join_or(const std::vector<std::string>& terms) {
  if (terms.empty()) return "false";
  if (terms.size() == 1) return terms.front();
  std::string out = "(or";
  for (const auto& t : terms) out += " " + t;
  return out + ")";
}

std::string port_var(const std::string& prefix, std::size_t uop, unsigned port) {
  return prefix + "_u" + std::to_string(uop) + "_p" + std::to_string(port);
}

std::string cardinality(const std::vector<std::string>& members) {
  std::vector<std::string> ones;
  for (const auto& m : members) ones.push_back("(ite " + m + " 1 0)");
  return sum(ones, "0");
}

}  // namespace

MappingEncoding encode_free_mapping(Script& script, const std::string& prefix, const SolverConfig& cfg) {
  if (cfg.n_ports == 0 || cfg.n_ports > kMaxPorts) throw EncodingError("number of ports must be in 1..16");
  std::map<std::string, std::string> improper;
  for (const auto& b : cfg.improper_blockers) improper[b.id] = b.shared_with;

  MappingEncoding enc;
  enc.n_ports = cfg.n_ports;

  auto own_uop = [&](const std::string& id, std::optional<unsigned> ports) {
    UopTerms u{id, 1, {}};
    const std::size_t index = enc.uops.size();
    for (unsigned k = 0; k < cfg.n_ports; ++k) {
      auto v = port_var(prefix, index, k);
      script.declare(v, "Bool");
      enc.variables.push_back(v);
      u.on_port.push_back(v);
    }
    if (ports) {
      if (*ports == 0 || *ports > cfg.n_ports)
        throw EncodingError("port count " + std::to_string(*ports) + " of '" + id + "' does not fit " +
                            std::to_string(cfg.n_ports) + " ports");
      script.assert_that("(= " + cardinality(u.on_port) + " " + std::to_string(*ports) + ")");
    } else {
      script.assert_that("(>= " + cardinality(u.on_port) + " 1)");
    }
    enc.uops.push_back(std::move(u));
  };

  std::map<std::string, std::size_t> first_uop;
  for (const auto& id : cfg.scope()) {
    if (improper.count(id)) continue;
    auto fact = cfg.port_counts.find(id);
    if (fact == cfg.port_counts.end()) throw EncodingError("no port-count fact for '" + id + "'");
    first_uop[id] = enc.uops.size();
    own_uop(id, fact->second);
  }
  for (const auto& id : cfg.scope()) {
    auto it = improper.find(id);
    if (it == improper.end()) continue;
    auto shared = first_uop.find(it->second);
    if (shared == first_uop.end())
      throw EncodingError("improper blocker '" + id + "' shares a μop with '" + it->second +
                          "', which is not a proper blocking instruction in scope");
    // The shared μop reuses the proper blocker's membership terms.
    UopTerms copy = enc.uops[shared->second];
    copy.insn = id;
    enc.uops.push_back(std::move(copy));
    auto fact = cfg.port_counts.find(id);
    own_uop(id, fact == cfg.port_counts.end() ? std::nullopt : std::optional<unsigned>(fact->second));
  }
  return enc;
}

MappingEncoding encode_fixed_mapping(const PortMapping& m, const std::vector<std::string>& scope) {
  MappingEncoding enc;
  enc.n_ports = m.n_ports();
  for (const auto& id : scope) {
    if (!m.contains(id)) throw EncodingError("mapping has no entry for '" + id + "'");
    for (const auto& entry : m.usage(id).entries()) {
      UopTerms u{id, entry.count, {}};
      for (unsigned k = 0; k < m.n_ports(); ++k) u.on_port.push_back(entry.ports.contains(k) ? "true" : "false");
      enc.uops.push_back(std::move(u));
    }
  }
  return enc;
}

ExperimentEncoding encode_free_experiment(Script& script, const std::string& prefix, const SolverConfig& cfg,
                                          std::optional<std::uint32_t> size_bound) {
  ExperimentEncoding enc;
  std::size_t index = 0;
  for (const auto& id : cfg.scope()) {
    auto v = prefix + "_x" + std::to_string(index++);
    script.declare(v, "Int");
    script.assert_that("(>= " + v + " 0)");
    script.assert_that("(<= " + v + " " + std::to_string(cfg.multiplicity_bound) + ")");
    enc.count[id] = v;
    enc.variables.push_back(v);
  }
  if (size_bound) script.assert_that("(<= " + sum(enc.variables, "0") + " " + std::to_string(*size_bound) + ")");
  return enc;
}

ExperimentEncoding encode_fixed_experiment(const Experiment& e, const std::vector<std::string>& scope) {
  ExperimentEncoding enc;
  for (const auto& [id, _] : e.counts())
    if (!std::binary_search(scope.begin(), scope.end(), id))
      throw EncodingError("experiment uses '" + id + "', which has no port-count fact");
  for (const auto& id : scope) enc.count[id] = std::to_string(e.count(id));
  enc.fixed = e;
  return enc;
}

ThroughputEncoding encode_throughput(Script& script) {
  ThroughputEncoding enc;
  enc.prefix = script.fresh("r");
  enc.t = enc.prefix + "_t";
  script.declare(enc.t, "Real");
  return enc;
}

std::string size_term(const ExperimentEncoding& eenc) {
  if (eenc.fixed) return real_literal(Rational(static_cast<std::int64_t>(experiment_size(*eenc.fixed))));
  std::vector<std::string> counts;
  for (const auto& [_, term] : eenc.count) counts.push_back(term);
  return "(to_real " + sum(counts, "0") + ")";
}

void emit_relate_throughput(Script& script, const MappingEncoding& menc, const ExperimentEncoding& eenc,
                            const ThroughputEncoding& tenc, const SolverConfig& cfg) {
  const std::string& pre = tenc.prefix;
  const unsigned n_ports = menc.n_ports;
  if (n_ports != cfg.n_ports)
    throw EncodingError("mapping has " + std::to_string(n_ports) + " ports, configuration " +
                        std::to_string(cfg.n_ports));

  // Mass contributed by each μop; μops with constant zero mass are dropped.
  struct Active {
    std::size_t index;
    std::string mass;
  };
  std::vector<Active> active;
  for (std::size_t u = 0; u < menc.uops.size(); ++u) {
    const auto& uop = menc.uops[u];
    auto it = eenc.count.find(uop.insn);
    if (it == eenc.count.end()) throw EncodingError("experiment encoding lacks '" + uop.insn + "'");
    if (eenc.fixed) {
      auto c = static_cast<std::int64_t>(eenc.fixed->count(uop.insn)) * uop.multiplicity;
      if (c == 0) continue;
      active.push_back({u, real_literal(Rational(c))});
    } else if (uop.multiplicity == 1) {
      active.push_back({u, "(to_real " + it->second + ")"});
    } else {
      active.push_back({u, "(to_real (* " + std::to_string(uop.multiplicity) + " " + it->second + "))"});
    }
  }

  // Unclipped model throughput.
  std::string tm = tenc.t;
  if (cfg.r_max) {
    tm = pre + "_tm";
    script.declare(tm, "Real");
  }

  std::vector<std::vector<std::string>> on_port(n_ports);
  for (const auto& a : active) {
    const auto& uop = menc.uops[a.index];
    std::vector<std::string> placed;
    for (unsigned k = 0; k < n_ports; ++k) {
      const std::string& m = uop.on_port[k];
      if (m == "false") continue;
      auto x = pre + "_x" + std::to_string(a.index) + "_" + std::to_string(k);
      script.declare(x, "Real");
      script.assert_that("(>= " + x + " 0.0)");
      if (m != "true") script.assert_that("(=> (not " + m + ") (= " + x + " 0.0))");
      placed.push_back(x);
      on_port[k].push_back(x);
    }
    script.assert_that("(= " + sum(placed, "0.0") + " " + a.mass + ")");
  }

  std::vector<std::string> q(n_ports);
  for (unsigned k = 0; k < n_ports; ++k) {
    auto p = pre + "_p" + std::to_string(k);
    q[k] = pre + "_q" + std::to_string(k);
    script.declare(p, "Real");
    script.declare(q[k], "Bool");
    script.assert_that("(= " + p + " " + sum(on_port[k], "0.0") + ")");
    script.assert_that("(<= " + p + " " + tm + ")");
    script.assert_that("(= " + q[k] + " (= " + p + " " + tm + "))");
  }
  script.assert_that(join_or(q));

  std::vector<std::string> restricted_mass, bottleneck_load;
  for (const auto& a : active) {
    const auto& uop = menc.uops[a.index];
    auto j = pre + "_j" + std::to_string(a.index);
    script.declare(j, "Bool");
    for (unsigned k = 0; k < n_ports; ++k) {
      const std::string& m = uop.on_port[k];
      if (m == "false") continue;
      if (m == "true")
        script.assert_that("(=> " + j + " " + q[k] + ")");
      else
        script.assert_that("(=> " + m + " (=> " + j + " " + q[k] + "))");
    }
    restricted_mass.push_back("(ite " + j + " " + a.mass + " 0.0)");
  }
  for (unsigned k = 0; k < n_ports; ++k) bottleneck_load.push_back("(ite " + q[k] + " " + tm + " 0.0)");
  script.assert_that("(= " + sum(restricted_mass, "0.0") + " " + sum(bottleneck_load, "0.0") + ")");

  if (cfg.r_max) {
    const Rational& r = *cfg.r_max;
    auto floor_cycles = "(/ (* " + real_literal(Rational(r.denominator())) + " " + size_term(eenc) + ") " +
                        real_literal(Rational(r.numerator())) + ")";
    script.assert_that("(>= " + tenc.t + " " + tm + ")");
    script.assert_that("(>= " + tenc.t + " " + floor_cycles + ")");
    script.assert_that("(or (= " + tenc.t + " " + tm + ") (= " + tenc.t + " " + floor_cycles + "))");
  }
}

// ---------------------------------------------------------------------------
// Queries

namespace {

std::atomic<std::uint64_t> g_verified{0};

void emit_observations(Script& script, const MappingEncoding& menc, const std::vector<Observation>& exps,
                       const std::vector<std::string>& scope, const SolverConfig& cfg) {
  const std::string eps = real_literal(cfg.epsilon);
  for (const auto& obs : exps) {
    if (obs.experiment.empty()) throw EncodingError("observation of the empty experiment");
    auto eenc = encode_fixed_experiment(obs.experiment, scope);
    auto tenc = encode_throughput(script);
    emit_relate_throughput(script, menc, eenc, tenc, cfg);
    const std::string te = real_literal(obs.cycles);
    const std::string slack = "(* " + eps + " " + size_term(eenc) + ")";
    script.assert_that("(< " + tenc.t + " (+ " + te + " " + slack + "))");
    script.assert_that("(> " + tenc.t + " (- " + te + " " + slack + "))");
  }
}

PortMapping decode_mapping(const MappingEncoding& menc, const std::map<std::string, smt::SExpr>& values,
                           const SolverConfig& cfg) {
  std::map<std::string, std::vector<UopEntry>> entries;
  for (const auto& uop : menc.uops) {
    PortSet s;
    for (unsigned k = 0; k < menc.n_ports; ++k) {
      const auto& term = uop.on_port[k];
      bool on = term == "true" ? true : term == "false" ? false : smt::to_bool(values.at(term));
      if (on) s.insert(k);
    }
    if (s.empty()) throw SolverProtocolError("model assigns no port to a μop of '" + uop.insn + "'");
    entries[uop.insn].push_back({s, uop.multiplicity});
  }
  PortMapping m(menc.n_ports);
  for (auto& [id, list] : entries) {
    // Proper instructions carry exactly their port-count fact.
    auto fact = cfg.port_counts.find(id);
    bool improper = std::any_of(cfg.improper_blockers.begin(), cfg.improper_blockers.end(),
                                [&](const ImproperBlocker& s) { return s.id == id; });
    if (fact != cfg.port_counts.end() && !improper && list.front().ports.size() != fact->second)
      throw SolverProtocolError("model violates the port count of '" + id + "'");
    m.set(id, PortUsage(std::move(list)));
  }
  return m;
}

template <typename F>
auto scoped_query(smt::Session& session, const Script& script, F&& on_sat) -> decltype(on_sat()) {
  session.push();
  try {
    session.run(script.commands());
    auto result = session.check();
    decltype(on_sat()) out{};
    if (result == smt::CheckResult::Unknown) throw SolverUnknown("solver answered unknown");
    if (result == smt::CheckResult::Sat) out = on_sat();
    session.pop();
    return out;
  } catch (...) {
    if (session.alive()) {
      try {
        session.pop();
      } catch (...) {
      }
    }
    throw;
  }
}

}  // namespace

std::optional<PortMapping> find_mapping(const std::vector<Observation>& exps, const SolverConfig& cfg,
                                        smt::Session& session) {
  if (exps.empty()) throw std::invalid_argument("find_mapping needs at least one observation");
  const auto scope = cfg.scope();
  Script script;
  auto menc = encode_free_mapping(script, "m", cfg);
  emit_observations(script, menc, exps, scope, cfg);

  return scoped_query(session, script, [&]() -> std::optional<PortMapping> {
    return decode_mapping(menc, session.get_values(menc.variables), cfg);
  });
}

std::optional<Distinguisher> find_other_mapping(const std::vector<Observation>& exps, const PortMapping& m1,
                                                const SolverConfig& cfg, std::optional<std::uint32_t> size_bound,
                                                smt::Session& session) {
  const auto scope = cfg.scope();
  Script script;
  auto mfree = encode_free_mapping(script, "m", cfg);
  emit_observations(script, mfree, exps, scope, cfg);

  auto mfixed = encode_fixed_mapping(m1, scope);
  auto efree = encode_free_experiment(script, "e", cfg, size_bound);
  script.assert_that("(>= " + sum(efree.variables, "0") + " 1)");
  auto t1 = encode_throughput(script);
  emit_relate_throughput(script, mfixed, efree, t1, cfg);
  auto t2 = encode_throughput(script);
  emit_relate_throughput(script, mfree, efree, t2, cfg);
  const std::string gap = "(* 2.0 " + real_literal(cfg.epsilon) + " " + size_term(efree) + ")";
  script.assert_that("(or (> (- " + t1.t + " " + t2.t + ") " + gap + ") (> (- " + t2.t + " " + t1.t + ") " + gap +
                     "))");

  auto found = scoped_query(session, script, [&]() -> std::optional<Distinguisher> {
    auto names = mfree.variables;
    names.insert(names.end(), efree.variables.begin(), efree.variables.end());
    names.push_back(t1.t);
    names.push_back(t2.t);
    auto values = session.get_values(names);
    Distinguisher d{decode_mapping(mfree, values, cfg), {}, smt::to_rational(values.at(t1.t)),
                    smt::to_rational(values.at(t2.t))};
    for (const auto& [id, term] : efree.count) {
      auto n = smt::to_int(values.at(term));
      if (n < 0) throw SolverProtocolError("negative experiment count for '" + id + "'");
      d.experiment.add(id, static_cast<std::uint32_t>(n));
    }
    return d;
  });
  if (!found) return found;

  // Independent recomputation with the simulator.
  const auto size = experiment_size(found->experiment);
  const Rational sim1 = clipped_throughput(m1, found->experiment, cfg.r_max);
  const Rational sim2 = clipped_throughput(found->mapping, found->experiment, cfg.r_max);
  if (sim1 != found->t_given || sim2 != found->t_other)
    throw SolverProtocolError("solver throughputs disagree with the simulator for {" + found->experiment.key() + "}");
  const Rational gap_needed = Rational(2) * rational_from_decimal(cfg.epsilon) * static_cast<std::int64_t>(size);
  const Rational diff = sim1 > sim2 ? sim1 - sim2 : sim2 - sim1;
  if (!(diff > gap_needed))
    throw SolverProtocolError("distinguishing experiment {" + found->experiment.key() + "} misses the 2ε gap");
  ++g_verified;
  return found;
}

std::uint64_t verified_distinguishers() { return g_verified.load(); }

namespace {

bool is_constant(const smt::SExpr& e) {
  if (!e.is_list) return !e.atom.empty() && (std::isdigit(static_cast<unsigned char>(e.atom[0])) != 0);
  if (e.items.empty() || e.items[0].is_list) return false;
  const auto& head = e.items[0].atom;
  if (head != "-" && head != "/" && head != "+" && head != "*" && head != "to_real") return false;
  return std::all_of(e.items.begin() + 1, e.items.end(), is_constant);
}

bool nonlinear(const smt::SExpr& e) {
  if (!e.is_list) return false;
  if (!e.items.empty() && e.items[0].is_atom("*")) {
    auto variable_args = std::count_if(e.items.begin() + 1, e.items.end(),
                                       [](const smt::SExpr& a) { return !is_constant(a); });
    if (variable_args > 1) return true;
  }
  return std::any_of(e.items.begin(), e.items.end(), nonlinear);
}

}  // namespace

bool has_nonlinear_product(const std::string& script_text) {
  std::size_t pos = 0;
  while (pos < script_text.size()) {
    auto end = script_text.find('\n', pos);
    if (end == std::string::npos) end = script_text.size();
    auto line = std::string_view(script_text).substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    if (nonlinear(smt::parse_sexpr(line))) return true;
  }
  return false;
}

}  // namespace pmwb
