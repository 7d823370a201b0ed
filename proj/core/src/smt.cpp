#include "pmwb/smt.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "pmwb/errors.hpp"
#include "pmwb/io.hpp"

namespace pmwb::smt {

// ---------------------------------------------------------------------------
// S-expressions

std::string SExpr::to_string() const {
  if (!is_list) return atom;
  std::string out = "(";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ' ';
    out += items[i].to_string();
  }
  return out + ")";
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }

// Returns the length of the first complete S-expression in text starting at
// `start` (after skipping whitespace), or npos if it is not complete yet.
std::size_t complete_length(std::string_view text, std::size_t start) {
  std::size_t i = start;
  if (i >= text.size()) return std::string_view::npos;
  if (text[i] != '(') {
    if (text[i] == '"' || text[i] == '|') {
      char close = text[i];
      for (++i; i < text.size(); ++i)
        if (text[i] == close) {
          if (close == '"' && i + 1 < text.size() && text[i + 1] == '"') {
            ++i;  // escaped quote
            continue;
          }
          return i + 1 - start;
        }
      return std::string_view::npos;
    }
    while (i < text.size() && !is_space(text[i]) && text[i] != '(' && text[i] != ')') ++i;
    // An atom at the very end of the buffer may still be growing.
    return i < text.size() ? i - start : std::string_view::npos;
  }
  int depth = 0;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '"' || c == '|') {
      char close = c;
      for (++i; i < text.size() && text[i] != close; ++i) {
      }
      if (i >= text.size()) return std::string_view::npos;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth == 0) return i + 1 - start;
    }
  }
  return std::string_view::npos;
}

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw SolverProtocolError("malformed S-expression (" + what + ") at offset " + std::to_string(pos) + ": " +
                              std::string(text.substr(0, 200)));
  }

  void skip() {
    while (pos < text.size() && is_space(text[pos])) ++pos;
  }

  SExpr parse() {
    skip();
    if (pos >= text.size()) fail("unexpected end");
    SExpr e;
    if (text[pos] == '(') {
      e.is_list = true;
      ++pos;
      for (;;) {
        skip();
        if (pos >= text.size()) fail("unbalanced parenthesis");
        if (text[pos] == ')') {
          ++pos;
          return e;
        }
        e.items.push_back(parse());
      }
    }
    if (text[pos] == ')') fail("unexpected ')'");
    std::size_t start = pos;
    if (text[pos] == '"' || text[pos] == '|') {
      char close = text[pos];
      for (++pos; pos < text.size(); ++pos) {
        if (text[pos] == close) {
          if (close == '"' && pos + 1 < text.size() && text[pos + 1] == '"') {
            ++pos;
            continue;
          }
          break;
        }
      }
      if (pos >= text.size()) fail("unterminated literal");
      ++pos;
    } else {
      while (pos < text.size() && !is_space(text[pos]) && text[pos] != '(' && text[pos] != ')') ++pos;
    }
    e.atom = std::string(text.substr(start, pos - start));
    return e;
  }
};

Rational parse_decimal(const std::string& s) {
  std::int64_t num = 0, den = 1;
  bool point = false, digits = false;
  for (char c : s) {
    if (c == '.' && !point) {
      point = true;
      continue;
    }
    if (c < '0' || c > '9') throw SolverProtocolError("not a numeral: " + s);
    if (num > (INT64_MAX - 9) / 10 || (point && den > INT64_MAX / 10))
      throw SolverProtocolError("numeral out of range: " + s);
    num = num * 10 + (c - '0');
    if (point) den *= 10;
    digits = true;
  }
  if (!digits) throw SolverProtocolError("not a numeral: " + s);
  return Rational(num, den);
}

}  // namespace

SExpr parse_sexpr(std::string_view text) {
  Parser p{text};
  SExpr e = p.parse();
  p.skip();
  if (p.pos != text.size()) p.fail("trailing input");
  return e;
}

bool to_bool(const SExpr& v) {
  if (v.is_atom("true")) return true;
  if (v.is_atom("false")) return false;
  throw SolverProtocolError("expected a boolean value, got " + v.to_string());
}

std::int64_t to_int(const SExpr& v) {
  Rational r = to_rational(v);
  if (r.denominator() != 1) throw SolverProtocolError("expected an integer value, got " + v.to_string());
  return r.numerator();
}

Rational to_rational(const SExpr& v) {
  if (!v.is_list) return parse_decimal(v.atom);
  if (v.items.size() == 2 && v.items[0].is_atom("-")) return -to_rational(v.items[1]);
  if (v.items.size() == 3 && v.items[0].is_atom("/")) {
    Rational d = to_rational(v.items[2]);
    if (d.numerator() == 0) throw SolverProtocolError("division by zero in value " + v.to_string());
    return to_rational(v.items[1]) / d;
  }
  throw SolverProtocolError("expected a numeric value, got " + v.to_string());
}

std::string int_literal(std::int64_t x) {
  return x < 0 ? "(- " + std::to_string(-x) + ")" : std::to_string(x);
}

std::string real_literal(const Rational& r) {
  std::string body;
  std::int64_t num = r.numerator() < 0 ? -r.numerator() : r.numerator();
  if (r.denominator() == 1)
    body = std::to_string(num) + ".0";
  else
    body = "(/ " + std::to_string(num) + ".0 " + std::to_string(r.denominator()) + ".0)";
  return r.numerator() < 0 ? "(- " + body + ")" : body;
}

std::string real_literal(double x) {
  std::string s = format_fixed(x < 0 ? -x : x);
  if (s.find('.') == std::string::npos) s += ".0";
  return x < 0 ? "(- " + s + ")" : s;
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < command.size()) {
    while (i < command.size() && is_space(command[i])) ++i;
    std::size_t start = i;
    while (i < command.size() && !is_space(command[i])) ++i;
    if (i > start) out.emplace_back(command.substr(start, i - start));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Session

Session::Session(SessionOptions options) : options_(std::move(options)) {
  auto argv_strings = split_command(options_.command);
  if (argv_strings.empty()) throw std::invalid_argument("empty solver command");

  // A dead solver must surface as an error on write, not as a signal.
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw SolverProtocolError(std::string("cannot create pipes: ") + std::strerror(errno));

  std::vector<char*> argv;
  for (auto& s : argv_strings) argv.push_back(s.data());
  argv.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0) throw SolverProtocolError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    int devnull = ::open("/dev/null", O_WRONLY);
    if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
    ::execvp(argv[0], argv.data());
    const char msg[] = "(error \"cannot execute solver command\")\n";
    [[maybe_unused]] auto n = ::write(STDOUT_FILENO, msg, sizeof msg - 1);
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_solver_ = in_pipe[1];
  from_solver_ = out_pipe[0];
  ::fcntl(to_solver_, F_SETFL, ::fcntl(to_solver_, F_GETFL) | O_NONBLOCK);

  if (options_.transcript_path) {
    transcript_file_.open(*options_.transcript_path, std::ios::trunc);
    if (!transcript_file_) throw IoError("cannot open transcript '" + options_.transcript_path->string() + "'");
  }

  try {
    run({"(set-option :print-success true)", "(set-option :produce-models true)",
         "(set-logic " + options_.logic + ")"});
  } catch (...) {
    kill_process();
    throw;
  }
}

Session::~Session() {
  if (pid_ > 0) {
    try {
      const std::string bye = "(exit)\n";
      [[maybe_unused]] auto n = ::write(to_solver_, bye.data(), bye.size());
    } catch (...) {
    }
    ::close(to_solver_);
    ::close(from_solver_);
    // Give the solver a moment to exit cleanly, then force it.
    for (int i = 0; i < 50; ++i) {
      int status;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
}

void Session::kill_process() {
  if (pid_ <= 0) return;
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
  ::close(to_solver_);
  ::close(from_solver_);
  pid_ = -1;
}

std::vector<SExpr> Session::exchange(const std::vector<std::string>& commands) {
  if (pid_ <= 0) throw SolverProtocolError("solver process is not running");

  std::string out;
  for (const auto& c : commands) {
    out += c;
    out += '\n';
    transcript_ += c;
    transcript_ += '\n';
    if (transcript_file_.is_open()) transcript_file_ << c << '\n';
  }
  if (transcript_file_.is_open()) transcript_file_.flush();

  std::vector<SExpr> responses;
  responses.reserve(commands.size());
  std::size_t written = 0;
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;

  while (responses.size() < commands.size()) {
    // Consume complete responses already buffered.
    for (;;) {
      std::size_t start = 0;
      while (start < read_buffer_.size() && is_space(read_buffer_[start])) ++start;
      std::size_t len = complete_length(read_buffer_, start);
      if (len == std::string_view::npos) {
        read_buffer_.erase(0, start);
        break;
      }
      responses.push_back(parse_sexpr(std::string_view(read_buffer_).substr(start, len)));
      read_buffer_.erase(0, start + len);
      if (responses.size() == commands.size()) break;
    }
    if (responses.size() == commands.size()) break;

    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      kill_process();
      throw SolverTimeout("solver did not answer within " + std::to_string(options_.timeout.count()) + " ms");
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();

    pollfd fds[2] = {{from_solver_, POLLIN, 0}, {to_solver_, POLLOUT, 0}};
    nfds_t nfds = written < out.size() ? 2 : 1;
    int rc = ::poll(fds, nfds, static_cast<int>(std::max<long long>(1, remaining)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw SolverProtocolError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      ssize_t n = ::write(to_solver_, out.data() + written, out.size() - written);
      if (n < 0 && errno != EAGAIN && errno != EINTR) {
        kill_process();
        throw SolverProtocolError("solver closed its input (command: " + commands.front() + ")");
      }
      if (n > 0) written += static_cast<std::size_t>(n);
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      ssize_t n = ::read(from_solver_, buf, sizeof buf);
      if (n == 0) {
        kill_process();
        std::string pending = read_buffer_.empty() ? "" : ": " + read_buffer_;
        throw SolverProtocolError("solver process exited unexpectedly" + pending);
      }
      if (n > 0) read_buffer_.append(buf, static_cast<std::size_t>(n));
    }
  }

  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& r = responses[i];
    if (r.is_list && !r.items.empty() && r.items[0].is_atom("error")) {
      std::string msg = r.items.size() > 1 ? r.items[1].atom : r.to_string();
      throw SolverProtocolError("solver rejected '" + commands[i] + "': " + msg);
    }
  }
  return responses;
}

void Session::run(const std::vector<std::string>& commands) {
  if (commands.empty()) return;
  auto responses = exchange(commands);
  for (std::size_t i = 0; i < responses.size(); ++i)
    if (!responses[i].is_atom("success"))
      throw SolverProtocolError("unexpected answer '" + responses[i].to_string() + "' to '" + commands[i] + "'");
}

CheckResult Session::check() {
  auto r = exchange({"(check-sat)"}).front();
  if (r.is_atom("sat")) return CheckResult::Sat;
  if (r.is_atom("unsat")) return CheckResult::Unsat;
  if (r.is_atom("unknown")) return CheckResult::Unknown;
  throw SolverProtocolError("unexpected answer '" + r.to_string() + "' to '(check-sat)'");
}

std::map<std::string, SExpr> Session::get_values(const std::vector<std::string>& names) {
  std::map<std::string, SExpr> out;
  if (names.empty()) return out;
  std::string cmd = "(get-value (";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) cmd += ' ';
    cmd += names[i];
  }
  cmd += "))";
  auto r = exchange({cmd}).front();
  if (!r.is_list) throw SolverProtocolError("unexpected answer '" + r.to_string() + "' to get-value");
  for (const auto& pair : r.items) {
    if (!pair.is_list || pair.items.size() != 2 || pair.items[0].is_list)
      throw SolverProtocolError("malformed get-value entry: " + pair.to_string());
    out[pair.items[0].atom] = pair.items[1];
  }
  for (const auto& n : names)
    if (!out.count(n)) throw SolverProtocolError("get-value answer lacks '" + n + "'");
  return out;
}

}  // namespace pmwb::smt
