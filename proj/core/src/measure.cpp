#include "pmwb/measure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pmwb/errors.hpp"
#include "pmwb/io.hpp"

namespace pmwb {

namespace {

constexpr const char* kLogSchema = "pmwb-log-v1";

}  // namespace

RawSample SimulatedBackend::raw_measure(const Experiment& e, std::uint64_t draw) {
  return {simulate_cycles(truth_, e, cfg_, draw), simulate_uops(truth_, e)};
}

Measurement measure(MeasurementBackend& backend, const Experiment& e, const MeasureConfig& cfg,
                    std::uint64_t draw_base) {
  if (e.empty()) throw std::invalid_argument("cannot measure the empty experiment");
  if (cfg.repetitions == 0) throw std::invalid_argument("repetitions must be positive");

  std::vector<double> cycles;
  std::map<std::uint64_t, unsigned> uops_seen;
  cycles.reserve(cfg.repetitions);
  for (std::uint32_t r = 0; r < cfg.repetitions; ++r) {
    RawSample s;
    try {
      s = backend.raw_measure(e, (draw_base << 16) + r);
    } catch (const std::exception& err) {
      throw BackendFailure("measuring {" + e.key() + "}: " + err.what());
    }
    if (!std::isfinite(s.cycles) || s.cycles < 0)
      throw BackendFailure("measuring {" + e.key() + "}: backend returned invalid cycle count");
    cycles.push_back(s.cycles);
    ++uops_seen[s.uops];
  }

  auto mid = cycles.begin() + static_cast<std::ptrdiff_t>((cycles.size() - 1) / 2);
  std::nth_element(cycles.begin(), mid, cycles.end());

  // Mode; ties go to the smaller count.
  auto mode = std::max_element(uops_seen.begin(), uops_seen.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  return Measurement{e, *mid, mode->first, cfg.repetitions};
}

bool cpi_equal(const Measurement& a, const Measurement& b, const MeasureConfig& cfg) {
  auto na = experiment_size(a.experiment), nb = experiment_size(b.experiment);
  if (na == 0 || nb == 0) throw std::invalid_argument("CPI of the empty experiment is undefined");
  return std::abs(a.cycles / static_cast<double>(na) - b.cycles / static_cast<double>(nb)) <= cfg.epsilon;
}

std::string log_to_text(const MeasurementLog& log) {
  std::string out = nlohmann::json{{"schema", kLogSchema}}.dump() + "\n";
  for (const auto& m : log) {
    out += "{\"counts\":" + counts_to_json(m.experiment).dump() + ",\"cycles\":" + format_decimal(m.cycles) +
           ",\"uops\":" + std::to_string(m.uops) + ",\"repetitions\":" + std::to_string(m.repetitions) + "}\n";
  }
  return out;
}

MeasurementLog log_from_text(std::string_view text, const std::string& origin) {
  MeasurementLog log;
  std::size_t line_no = 0, pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const std::size_t line_offset = pos;
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw FormatError(origin + ": invalid JSON", line_no, line_offset + err.byte);
    }
    if (!header_seen) {
      if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string())
        throw FormatError(origin + ": missing schema header", line_no, line_offset);
      auto version = j["schema"].get<std::string>();
      if (version != kLogSchema)
        throw FormatError(origin + ": unsupported log schema '" + version + "'", line_no, line_offset);
      header_seen = true;
      continue;
    }
    try {
      if (!j.is_object() || !j.contains("counts") || !j.contains("cycles") || !j.contains("uops") ||
          !j.contains("repetitions"))
        throw FormatError("measurement needs counts, cycles, uops and repetitions");
      if (!j["cycles"].is_number() || !j["uops"].is_number_unsigned() || !j["repetitions"].is_number_unsigned())
        throw FormatError("measurement field has the wrong type");
      Measurement m;
      m.experiment = counts_from_json(j["counts"]);
      m.cycles = j["cycles"].get<double>();
      m.uops = j["uops"].get<std::uint64_t>();
      m.repetitions = j["repetitions"].get<std::uint32_t>();
      if (m.repetitions == 0) throw FormatError("repetitions must be positive");
      log.push_back(std::move(m));
    } catch (const FormatError& err) {
      throw FormatError(origin + ": " + err.what(), line_no, line_offset);
    }
  }
  if (!header_seen) throw FormatError(origin + ": empty measurement log", 1, 0);
  return log;
}

void log_save(const MeasurementLog& log, const std::filesystem::path& path) {
  write_text_file(path, log_to_text(log));
}

MeasurementLog log_load(const std::filesystem::path& path) {
  return log_from_text(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Harness

Measurement Harness::measure(const Experiment& e) {
  std::uint64_t epoch;
  {
    std::lock_guard lock(mutex_);
    epoch = epoch_;
    auto it = cache_.find({epoch, e});
    if (it != cache_.end()) return it->second;
  }
  Measurement m = pmwb::measure(backend_, e, cfg_, epoch);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(std::make_pair(epoch, e), m);
  if (inserted) {
    log_.push_back(m);
    ++runs_;
  }
  return it->second;
}

void Harness::set_epoch(std::uint64_t epoch) {
  std::lock_guard lock(mutex_);
  epoch_ = epoch;
}

std::uint64_t Harness::epoch() const {
  std::lock_guard lock(mutex_);
  return epoch_;
}

MeasurementLog Harness::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t Harness::backend_runs() const {
  std::lock_guard lock(mutex_);
  return runs_;
}

}  // namespace pmwb
