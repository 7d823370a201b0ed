#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmwb/mapping.hpp"

namespace pmwb {

// Port mapping file:
//   { "num_ports": 4,
//     "instructions": [ { "name": "add", "uops": [ { "ports": [0,1], "count": 1 } ],
//                         "uop_count_override": 2 }, ... ] }
// "uop_count_override" is optional. Instructions are written sorted by name.
nlohmann::json mapping_to_json(const PortMapping& m);
PortMapping mapping_from_json(const nlohmann::json& j);

nlohmann::json usage_to_json(const PortUsage& u);
PortUsage usage_from_json(const nlohmann::json& j, unsigned n_ports);

nlohmann::json counts_to_json(const Experiment& e);
Experiment counts_from_json(const nlohmann::json& j);

// Experiment file: { "experiments": [ { "counts": { "add": 6, "fma": 1 } }, ... ] }
nlohmann::json experiments_to_json(const std::vector<Experiment>& exps);
std::vector<Experiment> experiments_from_json(const nlohmann::json& j);

/// Parses JSON text; syntax errors become FormatError with line and column.
nlohmann::json parse_json(std::string_view text, const std::string& origin);
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes pretty-printed JSON (object keys sorted) followed by a newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

PortMapping load_mapping(const std::filesystem::path& path);
void save_mapping(const std::filesystem::path& path, const PortMapping& m);
std::vector<Experiment> load_experiments(const std::filesystem::path& path);
void save_experiments(const std::filesystem::path& path, const std::vector<Experiment>& exps);

/// Decimal with 17 significant digits; round-trips doubles exactly.
std::string format_decimal(double x);
/// Shortest fixed-point decimal that round-trips (no exponent), e.g. "0.02".
std::string format_fixed(double x);
/// Exact rational value of the shortest decimal representation of x,
/// e.g. 0.02 -> 1/50.
Rational rational_from_decimal(double x);

}  // namespace pmwb
