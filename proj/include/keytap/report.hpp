#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace keytap {

inline constexpr const char* kToolName = "keytap";
inline constexpr const char* kToolVersion = "0.1.0";

// Seed precedence: explicit flag, then KEYTAP_SEED, then the config value.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed);

// Parses KEYTAP_SEED; nullopt when unset. Malformed values are contract errors.
std::optional<std::uint64_t> env_seed();

// {tool, version, command, config, seed}; seed omitted for deterministic runs.
nlohmann::json provenance(const std::string& command, const nlohmann::json& config,
                          std::optional<std::uint64_t> seed);

// Report body plus provenance under "provenance".
nlohmann::json make_report(const std::string& command, const nlohmann::json& config,
                           std::optional<std::uint64_t> seed, nlohmann::json body);

// Stable serialization: sorted keys, two-space indent, trailing newline.
std::string render_json(const nlohmann::json& j);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
};

std::string format_number(double v);
std::string render_csv(const Table& t);
void write_csv(const std::filesystem::path& path, const Table& t);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> y_min;  // data range when unset
  std::optional<double> y_max;
};

std::string render_svg(const Plot& p);
void write_svg(const std::filesystem::path& path, const Plot& p);

// Accuracies reported for human recordings, carried in reports for
// comparison; synthetic corpora are not expected to match them.
nlohmann::json reference_targets(const std::string& scenario);

}  // namespace keytap
