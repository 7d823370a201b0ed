#include "pmwb/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pmwb/errors.hpp"

namespace pmwb {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const char* where) {
  if (!j.is_object()) throw FormatError(std::string(where) + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string(where) + ": missing key '" + key + "'");
  return *it;
}

std::uint64_t require_uint(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
    throw FormatError(what + ": expected a non-negative integer, got " + j.dump());
  return j.get<std::uint64_t>();
}

}  // namespace

json usage_to_json(const PortUsage& u) {
  json uops = json::array();
  for (const auto& e : u.entries()) uops.push_back({{"ports", e.ports.ports()}, {"count", e.count}});
  return uops;
}

PortUsage usage_from_json(const json& j, unsigned n_ports) {
  if (!j.is_array()) throw FormatError("'uops' must be an array");
  std::vector<UopEntry> entries;
  for (const auto& u : j) {
    const auto& ports = require(u, "ports", "uop");
    if (!ports.is_array() || ports.empty()) throw FormatError("uop 'ports' must be a nonempty array");
    PortSet s;
    for (const auto& p : ports) {
      auto idx = require_uint(p, "port index");
      if (idx >= n_ports)
        throw FormatError("port index " + std::to_string(idx) + " out of range for " + std::to_string(n_ports) +
                          " ports");
      s.insert(static_cast<unsigned>(idx));
    }
    auto count = u.contains("count") ? require_uint(u["count"], "uop count") : 1;
    if (count == 0) throw FormatError("uop count must be positive");
    entries.push_back({s, static_cast<std::uint32_t>(count)});
  }
  return PortUsage(std::move(entries));
}

json mapping_to_json(const PortMapping& m) {
  json insns = json::array();
  for (const auto& [id, insn] : m.instructions()) {
    json o = {{"name", id}, {"uops", usage_to_json(insn.usage)}};
    if (insn.uop_count_override) o["uop_count_override"] = *insn.uop_count_override;
    insns.push_back(std::move(o));
  }
  return {{"num_ports", m.n_ports()}, {"instructions", std::move(insns)}};
}

PortMapping mapping_from_json(const json& j) {
  auto n = require_uint(require(j, "num_ports", "mapping"), "num_ports");
  if (n == 0 || n > kMaxPorts) throw FormatError("num_ports must be in 1..16");
  PortMapping m(static_cast<unsigned>(n));
  const auto& insns = require(j, "instructions", "mapping");
  if (!insns.is_array()) throw FormatError("'instructions' must be an array");
  for (const auto& insn : insns) {
    const auto& name = require(insn, "name", "instruction");
    if (!name.is_string() || name.get<std::string>().empty())
      throw FormatError("instruction name must be a nonempty string");
    auto id = name.get<std::string>();
    if (m.contains(id)) throw FormatError("duplicate instruction '" + id + "'");
    std::optional<std::uint32_t> override_count;
    if (insn.contains("uop_count_override"))
      override_count = static_cast<std::uint32_t>(require_uint(insn["uop_count_override"], "uop_count_override"));
    m.set(id, usage_from_json(require(insn, "uops", "instruction"), m.n_ports()), override_count);
  }
  return m;
}

json counts_to_json(const Experiment& e) {
  json o = json::object();
  for (const auto& [id, c] : e.counts()) o[id] = c;
  return o;
}

Experiment counts_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("'counts' must be an object");
  Experiment e;
  for (const auto& [id, c] : j.items()) {
    auto n = require_uint(c, "count of '" + id + "'");
    if (n == 0) throw FormatError("count of '" + id + "' must be positive");
    e.add(id, static_cast<std::uint32_t>(n));
  }
  return e;
}

json experiments_to_json(const std::vector<Experiment>& exps) {
  json arr = json::array();
  for (const auto& e : exps) arr.push_back({{"counts", counts_to_json(e)}});
  return {{"experiments", std::move(arr)}};
}

std::vector<Experiment> experiments_from_json(const json& j) {
  const auto& arr = require(j, "experiments", "experiment file");
  if (!arr.is_array()) throw FormatError("'experiments' must be an array");
  std::vector<Experiment> out;
  for (const auto& e : arr) out.push_back(counts_from_json(require(e, "counts", "experiment")));
  return out;
}

json parse_json(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& err) {
    // Translate the byte offset into a line number and column.
    std::size_t line = 1, col = 1;
    std::size_t limit = std::min<std::size_t>(err.byte == 0 ? 0 : err.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FormatError(origin + ": invalid JSON", line, col);
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

json read_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

PortMapping load_mapping(const std::filesystem::path& path) {
  auto j = read_json_file(path);
  try {
    return mapping_from_json(j);
  } catch (const FormatError& err) {
    throw FormatError(path.string() + ": " + err.what());
  }
}

void save_mapping(const std::filesystem::path& path, const PortMapping& m) {
  write_json_file(path, mapping_to_json(m));
}

std::vector<Experiment> load_experiments(const std::filesystem::path& path) {
  auto j = read_json_file(path);
  try {
    return experiments_from_json(j);
  } catch (const FormatError& err) {
    throw FormatError(path.string() + ": " + err.what());
  }
}

void save_experiments(const std::filesystem::path& path, const std::vector<Experiment>& exps) {
  write_json_file(path, experiments_to_json(exps));
}

std::string format_decimal(double x) {
  std::array<char, 64> buf{};
  int n = std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

std::string format_fixed(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot format non-finite value");
  std::array<char, 512> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed);
  if (ec != std::errc{}) throw std::invalid_argument("value too large to format");
  return std::string(buf.data(), ptr);
}

Rational rational_from_decimal(double x) {
  std::string s = format_fixed(x);
  bool negative = false;
  std::size_t i = 0;
  if (s[0] == '-') {
    negative = true;
    i = 1;
  }
  std::int64_t num = 0, den = 1;
  bool after_point = false;
  constexpr std::int64_t kLimit = std::numeric_limits<std::int64_t>::max() / 10;
  for (; i < s.size(); ++i) {
    if (s[i] == '.') {
      after_point = true;
      continue;
    }
    if (num > kLimit || (after_point && den > kLimit))
      throw std::overflow_error("decimal " + s + " does not fit a 64-bit rational");
    num = num * 10 + (s[i] - '0');
    if (after_point) den *= 10;
  }
  return Rational(negative ? -num : num, den);
}

}  // namespace pmwb
