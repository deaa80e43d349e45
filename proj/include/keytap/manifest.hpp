#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "keytap/recording.hpp"

namespace keytap {

// One JSON-lines row: {path, key_label, user, device_model, device_unit,
// typing_style, channel} plus optional onsets_s.
struct ManifestRecord {
  std::string path;
  std::string key_label;
  SampleMeta meta;
  std::vector<double> onsets_s;
};

nlohmann::json to_json(const ManifestRecord& r);
ManifestRecord manifest_record_from_json(const nlohmann::json& j);

// ParseError carries the byte offset of the offending line.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

// Unset fields match anything.
struct Selector {
  std::optional<std::string> user;
  std::optional<std::string> device_model;
  std::optional<std::string> device_unit;
  std::optional<std::string> typing_style;
  std::optional<std::string> channel;

  // Deterministic hold-out, stratified by key label: within each label,
  // rows are ranked by FNV-1a hash of their path and fold = rank mod k.
  // take_test keeps fold `index`, otherwise every other fold.
  struct PathSplit {
    std::uint64_t k = 5;
    std::uint64_t index = 0;
    bool take_test = true;
  };
  std::optional<PathSplit> split;

  // Field filters only; the split needs the whole manifest.
  bool matches(const SampleMeta& m) const;
};

nlohmann::json to_json(const Selector& s);
Selector selector_from_json(const nlohmann::json& j);

// Loads the selected rows; relative paths resolve against the manifest's
// directory. meta.source is set to the row path.
// Rows passing the field filters and the split, in manifest order.
std::vector<ManifestRecord> select_records(const std::vector<ManifestRecord>& rows, const Selector& sel);

std::vector<Recording> load_recordings(const std::filesystem::path& manifest, const Selector& sel = {});

}  // namespace keytap
