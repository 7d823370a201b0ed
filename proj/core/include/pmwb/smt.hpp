#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmwb/mapping.hpp"

namespace pmwb::smt {

/// Parsed S-expression: an atom or a list.
struct SExpr {
  std::string atom;
  std::vector<SExpr> items;
  bool is_list = false;

  bool is_atom(std::string_view s) const { return !is_list && atom == s; }
  std::string to_string() const;
};

/// Parses exactly one S-expression from text (surrounding whitespace allowed).
/// Throws SolverProtocolError on malformed input.
SExpr parse_sexpr(std::string_view text);

/// Value decoding for (get-value ...) answers.
bool to_bool(const SExpr& v);
std::int64_t to_int(const SExpr& v);
Rational to_rational(const SExpr& v);

/// Real numeral in SMT-LIB syntax, e.g. "3.0", "(- 0.5)", "(/ 1.0 3.0)".
std::string real_literal(const Rational& r);
std::string real_literal(double x);
std::string int_literal(std::int64_t x);

enum class CheckResult { Sat, Unsat, Unknown };

struct SessionOptions {
  /// Whitespace-separated command line, e.g. "z3 -in".
  std::string command = "z3 -in";
  std::chrono::milliseconds timeout{60000};
  std::string logic = "QF_LIRA";
  /// When set, every command sent is appended to this file, one per line.
  std::optional<std::filesystem::path> transcript_path;
};

/// A running solver process spoken to over SMT-LIB 2 on stdin/stdout.
/// Single owner, strictly sequential.
class Session {
public:
  explicit Session(SessionOptions options);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Sends commands that must each answer "success". Commands are pipelined.
  /// Throws SolverProtocolError naming the offending command, SolverTimeout.
  void run(const std::vector<std::string>& commands);
  void run(const std::string& command) { run(std::vector<std::string>{command}); }

  void push() { run("(push 1)"); }
  void pop() { run("(pop 1)"); }
  CheckResult check();
  /// Values of the given constants in the current model.
  std::map<std::string, SExpr> get_values(const std::vector<std::string>& names);

  /// Every command sent so far, one per line.
  const std::string& transcript() const noexcept { return transcript_; }
  bool alive() const noexcept { return pid_ > 0; }

private:
  std::vector<SExpr> exchange(const std::vector<std::string>& commands);
  void kill_process();

  SessionOptions options_;
  int pid_ = -1;
  int to_solver_ = -1;
  int from_solver_ = -1;
  std::string read_buffer_;
  std::string transcript_;
  std::ofstream transcript_file_;
};

/// Splits a command line on whitespace.
std::vector<std::string> split_command(std::string_view command);

}  // namespace pmwb::smt
