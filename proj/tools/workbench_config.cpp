#include "workbench_config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include "pmwb/io.hpp"

#ifndef PMWB_DEFAULT_SOLVER
#define PMWB_DEFAULT_SOLVER "z3 -in"
#endif

namespace pmwb::cli {

namespace {

struct Value {
  enum class Kind { String, Integer, Real, Boolean, Array } kind = Kind::String;
  std::string text;  // strings, and the source spelling of numbers
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<Value> items;
};

class Parser {
public:
  Parser(std::string_view line, std::string origin, std::size_t line_no)
      : s_(line), origin_(std::move(origin)), line_(line_no) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin_ + ":" + std::to_string(line_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  Value value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return boolean(true);
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return boolean(false);
    }
    return number();
  }

private:
  static Value boolean(bool b) {
    Value v;
    v.kind = Value::Kind::Boolean;
    v.boolean = b;
    return v;
  }

  Value string() {
    Value v;
    ++pos_;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated string");
        char e = s_[pos_++];
        switch (e) {
          case '"': v.text += '"'; break;
          case '\\': v.text += '\\'; break;
          case 'n': v.text += '\n'; break;
          case 't': v.text += '\t'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      } else {
        v.text += c;
      }
    }
    return v;
  }

  Value array() {
    Value v;
    v.kind = Value::Kind::Array;
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      v.items.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      fail("expected ',' or ']' in array");
    }
  }

  Value number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_'))
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("unexpected character '" + std::string(1, s_[start]) + "'");
    std::erase(tok, '_');
    Value v;
    v.text = tok;
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), i);
    if (ec == std::errc() && p == tok.data() + tok.size()) {
      v.kind = Value::Kind::Integer;
      v.integer = i;
      v.real = static_cast<double>(i);
      return v;
    }
    double d = 0;
    auto [q, ec2] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec2 == std::errc() && q == tok.data() + tok.size() && std::isfinite(d)) {
      v.kind = Value::Kind::Real;
      v.real = d;
      return v;
    }
    fail("invalid value '" + tok + "'");
  }

public:
  std::string key() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-'))
      ++pos_;
    if (start == pos_) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string section() {
    expect('[');
    auto name = key();
    expect(']');
    if (!at_end()) fail("trailing characters after section header");
    return name;
  }

private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::string origin_;
  std::size_t line_;
};

struct Located {
  Value value;
  std::size_t line;
};

}  // namespace

Rational parse_rational(const std::string& text) {
  auto slash = text.find('/');
  auto parse_int = [&](std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("invalid rational '" + text + "'");
    return v;
  };
  if (slash != std::string::npos) {
    auto num = parse_int(std::string_view(text).substr(0, slash));
    auto den = parse_int(std::string_view(text).substr(slash + 1));
    if (den == 0) throw ConfigError("zero denominator in '" + text + "'");
    return Rational(num, den);
  }
  double d = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(d))
    throw ConfigError("invalid number '" + text + "'");
  return rational_from_decimal(d);
}

WorkbenchConfig parse_config(const std::string& text, const std::string& origin,
                             const std::filesystem::path& base_dir) {
  std::map<std::string, std::map<std::string, Located>> sections;
  std::map<std::string, std::size_t> section_lines;
  std::string current;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    Parser p(line, origin, line_no);
    if (p.at_end()) continue;
    auto first = line.find_first_not_of(" \t");
    if (line[first] == '[') {
      current = p.section();
      if (section_lines.count(current)) p.fail("duplicate section [" + current + "]");
      section_lines[current] = line_no;
      sections[current];
      continue;
    }
    auto key = p.key();
    p.expect('=');
    auto value = p.value();
    if (!p.at_end()) p.fail("trailing characters after value");
    if (!sections[current].emplace(key, Located{value, line_no}).second)
      p.fail("duplicate key '" + key + "'");
  }

  WorkbenchConfig cfg;
  auto fail = [&](std::size_t at, const std::string& msg) -> void {
    throw ConfigError(origin + ":" + std::to_string(at) + ": " + msg);
  };
  auto as_string = [&](const Located& v, const std::string& key) {
    if (v.value.kind != Value::Kind::String) fail(v.line, "'" + key + "' must be a string");
    return v.value.text;
  };
  auto as_uint = [&](const Located& v, const std::string& key, std::uint64_t min) {
    if (v.value.kind != Value::Kind::Integer || v.value.integer < static_cast<std::int64_t>(min))
      fail(v.line, "'" + key + "' must be an integer >= " + std::to_string(min));
    return static_cast<std::uint64_t>(v.value.integer);
  };
  auto as_real = [&](const Located& v, const std::string& key) {
    if (v.value.kind != Value::Kind::Integer && v.value.kind != Value::Kind::Real)
      fail(v.line, "'" + key + "' must be a number");
    return v.value.real;
  };
  auto as_bool = [&](const Located& v, const std::string& key) {
    if (v.value.kind != Value::Kind::Boolean) fail(v.line, "'" + key + "' must be true or false");
    return v.value.boolean;
  };
  auto existing = [&](const Located& v, const std::string& key) {
    std::filesystem::path p = as_string(v, key);
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) fail(v.line, "'" + key + "' refers to missing file '" + p.string() + "'");
    return p;
  };

  using Handler = std::function<void(const Located&, const std::string&)>;
  const std::map<std::string, std::map<std::string, Handler>> schema = {
      {"",
       {{"mapping", [&](const Located& v, const std::string& k) { cfg.mapping = existing(v, k); }},
        {"out",
         [&](const Located& v, const std::string& k) {
           std::filesystem::path p = as_string(v, k);
           cfg.out_dir = p.is_relative() ? base_dir / p : p;
         }},
        {"seed", [&](const Located& v, const std::string& k) { cfg.seed = as_uint(v, k, 0); }}}},
      {"sim",
       {{"r_max",
         [&](const Located& v, const std::string& k) {
           if (v.value.kind == Value::Kind::Array || v.value.kind == Value::Kind::Boolean)
             fail(v.line, "'r_max' must be a number or a \"p/q\" string");
           Rational r;
           try {
             r = parse_rational(v.value.text);
           } catch (const ConfigError& e) {
             fail(v.line, std::string("'") + k + "': " + e.what());
           }
           if (r <= 0) fail(v.line, "'r_max' must be positive");
           cfg.sim.r_max = r;
         }},
        {"noise",
         [&](const Located& v, const std::string& k) {
           cfg.sim.noise_rel_std = as_real(v, k);
           if (cfg.sim.noise_rel_std < 0) fail(v.line, "'noise' must be non-negative");
         }},
        {"seed",
         [&](const Located& v, const std::string& k) {
           cfg.sim.rng_seed = as_uint(v, k, 0);
           cfg.sim_seed_set = true;
         }}}},
      {"measure",
       {{"epsilon",
         [&](const Located& v, const std::string& k) {
           cfg.measure.epsilon = as_real(v, k);
           if (!(cfg.measure.epsilon > 0)) fail(v.line, "'epsilon' must be positive");
         }},
        {"repetitions",
         [&](const Located& v, const std::string& k) {
           cfg.measure.repetitions = static_cast<std::uint32_t>(as_uint(v, k, 1));
         }}}},
      {"solver",
       {{"command",
         [&](const Located& v, const std::string& k) {
           cfg.solver.solver_command = as_string(v, k);
           cfg.solver_command_set = true;
         }},
        {"timeout_ms",
         [&](const Located& v, const std::string& k) {
           cfg.solver.timeout = std::chrono::milliseconds(as_uint(v, k, 1));
         }},
        {"multiplicity_bound",
         [&](const Located& v, const std::string& k) {
           cfg.solver.multiplicity_bound = static_cast<std::uint32_t>(as_uint(v, k, 1));
         }},
        {"n_ports",
         [&](const Located& v, const std::string& k) {
           auto n = as_uint(v, k, 1);
           if (n > kMaxPorts) fail(v.line, "'n_ports' must be at most 16");
           cfg.solver.n_ports = static_cast<unsigned>(n);
         }},
        {"improper",
         [&](const Located& v, const std::string&) {
           if (v.value.kind != Value::Kind::Array) fail(v.line, "'improper' must be an array of \"id:shared\" strings");
           for (const auto& item : v.value.items) {
             auto colon = item.text.find(':');
             if (item.kind != Value::Kind::String || colon == std::string::npos || colon == 0 ||
                 colon + 1 == item.text.size())
               fail(v.line, "improper blocker entries look like \"id:shared\"");
             cfg.solver.improper_blockers.push_back({item.text.substr(0, colon), item.text.substr(colon + 1)});
           }
         }}}},
      {"charmap",
       {{"votes",
         [&](const Located& v, const std::string& k) {
           auto n = as_uint(v, k, 1);
           if (n % 2 == 0) fail(v.line, "'votes' must be odd");
           cfg.charmap.votes = static_cast<std::uint32_t>(n);
         }},
        {"didactic_k", [&](const Located& v, const std::string& k) { cfg.charmap.didactic_k = as_bool(v, k); }}}},
      {"eval",
       {{"blocks", [&](const Located& v, const std::string& k) { cfg.eval.blocks = as_uint(v, k, 2); }},
        {"block_size",
         [&](const Located& v, const std::string& k) {
           cfg.eval.block_size = static_cast<std::uint32_t>(as_uint(v, k, 1));
         }},
        {"bucket_width",
         [&](const Located& v, const std::string& k) {
           cfg.eval.bucket_width = as_real(v, k);
           if (!(cfg.eval.bucket_width > 0)) fail(v.line, "'bucket_width' must be positive");
         }},
        {"clip", [&](const Located& v, const std::string& k) { cfg.eval.clip = as_bool(v, k); }}}},
  };

  for (const auto& [name, keys] : sections) {
    auto sec = schema.find(name);
    if (sec == schema.end()) fail(section_lines[name], "unknown section [" + name + "]");
    for (const auto& [key, v] : keys) {
      auto h = sec->second.find(key);
      if (h == sec->second.end())
        fail(v.line, "unknown key '" + key + "'" + (name.empty() ? "" : " in [" + name + "]"));
      h->second(v, key);
    }
  }
  return cfg;
}

WorkbenchConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  auto base = path.parent_path();
  return parse_config(text, path.string(), base.empty() ? std::filesystem::path(".") : base);
}

void finalize_config(WorkbenchConfig& cfg, const Overrides& flags, const char* env_solver) {
  if (flags.seed) {
    cfg.seed = *flags.seed;
    cfg.sim.rng_seed = *flags.seed;
  } else if (!cfg.sim_seed_set) {
    cfg.sim.rng_seed = cfg.seed;
  }
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.epsilon) {
    if (!(*flags.epsilon > 0)) throw ConfigError("--epsilon must be positive");
    cfg.measure.epsilon = *flags.epsilon;
  }
  if (flags.r_max) {
    auto r = parse_rational(*flags.r_max);
    if (r <= 0) throw ConfigError("--rmax must be positive");
    cfg.sim.r_max = r;
  }
  if (flags.solver)
    cfg.solver.solver_command = *flags.solver;
  else if (!cfg.solver_command_set)
    cfg.solver.solver_command = env_solver && *env_solver ? env_solver : PMWB_DEFAULT_SOLVER;

  cfg.solver.epsilon = cfg.measure.epsilon;
  cfg.solver.r_max = cfg.sim.r_max;
  cfg.charmap.epsilon = cfg.measure.epsilon;
}

}  // namespace pmwb::cli
