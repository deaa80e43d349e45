#include "keytap/manifest.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "keytap/errors.hpp"
#include "keytap/io.hpp"
#include "keytap/wav.hpp"

namespace keytap {

nlohmann::json to_json(const ManifestRecord& r) {
  nlohmann::json j{{"path", r.path},
                   {"key_label", r.key_label},
                   {"user", r.meta.user},
                   {"device_model", r.meta.device_model},
                   {"device_unit", r.meta.device_unit},
                   {"typing_style", to_string(r.meta.typing_style)},
                   {"channel", r.meta.channel}};
  if (!r.onsets_s.empty()) j["onsets_s"] = r.onsets_s;
  return j;
}

ManifestRecord manifest_record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("manifest row must be a JSON object");
  ManifestRecord r;
  try {
    r.path = j.at("path").get<std::string>();
    r.key_label = j.at("key_label").get<std::string>();
    r.meta.user = j.value("user", std::string{});
    r.meta.device_model = j.value("device_model", std::string{});
    r.meta.device_unit = j.value("device_unit", std::string{});
    r.meta.typing_style = typing_style_from_string(j.value("typing_style", std::string("Touch")));
    r.meta.channel = j.value("channel", std::string("plain"));
    if (j.contains("onsets_s")) r.onsets_s = j.at("onsets_s").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("manifest row: ") + e.what());
  }
  r.meta.source = r.path;
  return r;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<ManifestRecord> out;
  std::size_t offset = 0;
  while (offset < text.size()) {
    std::size_t end = text.find('\n', offset);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(offset, end - offset);
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": invalid JSON line: " + e.what(), offset + (e.byte > 0 ? e.byte - 1 : 0));
      }
      try {
        out.push_back(manifest_record_from_json(j));
      } catch (const ContractError& e) {
        throw ParseError(path.string() + ": " + e.what(), offset);
      }
    }
    offset = end + 1;
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::string text;
  for (const auto& r : records) text += to_json(r).dump() + "\n";
  write_file_atomic(path, text);
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

bool Selector::matches(const SampleMeta& m) const {
  return (!user || *user == m.user) && (!device_model || *device_model == m.device_model) &&
         (!device_unit || *device_unit == m.device_unit) && (!typing_style || *typing_style == to_string(m.typing_style)) &&
         (!channel || *channel == m.channel);
}

nlohmann::json to_json(const Selector& s) {
  nlohmann::json j = nlohmann::json::object();
  if (s.user) j["user"] = *s.user;
  if (s.device_model) j["device_model"] = *s.device_model;
  if (s.device_unit) j["device_unit"] = *s.device_unit;
  if (s.typing_style) j["typing_style"] = *s.typing_style;
  if (s.channel) j["channel"] = *s.channel;
  if (s.split) {
    j["split"] = {{"k", s.split->k}, {"index", s.split->index}, {"take", s.split->take_test ? "test" : "train"}};
  }
  return j;
}

Selector selector_from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw ContractError("selector must be a JSON object");
  static const std::set<std::string> known = {"user", "device_model", "device_unit", "typing_style", "channel", "split"};
  Selector s;
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ContractError("unknown selector key '" + k + "'");
    if (k == "split") continue;
    if (!v.is_string()) throw ContractError("selector value for '" + k + "' must be a string");
  }
  if (j.contains("user")) s.user = j["user"].get<std::string>();
  if (j.contains("device_model")) s.device_model = j["device_model"].get<std::string>();
  if (j.contains("device_unit")) s.device_unit = j["device_unit"].get<std::string>();
  if (j.contains("typing_style")) s.typing_style = j["typing_style"].get<std::string>();
  if (j.contains("channel")) s.channel = j["channel"].get<std::string>();
  if (j.contains("split")) {
    const auto& sp = j["split"];
    Selector::PathSplit ps;
    try {
      ps.k = sp.value("k", ps.k);
      ps.index = sp.value("index", ps.index);
      const std::string take = sp.value("take", std::string("test"));
      if (take != "test" && take != "train") throw ContractError("selector split: take must be 'test' or 'train'");
      ps.take_test = take == "test";
    } catch (const nlohmann::json::exception& e) {
      throw ContractError(std::string("selector split: ") + e.what());
    }
    if (ps.k < 2 || ps.index >= ps.k) throw ContractError("selector split: need k >= 2 and index < k");
    s.split = ps;
  }
  return s;
}

std::vector<ManifestRecord> select_records(const std::vector<ManifestRecord>& rows, const Selector& sel) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (sel.matches(rows[i].meta)) kept.push_back(i);
  }
  if (sel.split) {
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (auto i : kept) by_label[rows[i].key_label].push_back(i);
    std::vector<std::size_t> chosen;
    for (auto& [label, idx] : by_label) {
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto ha = fnv1a(rows[a].path), hb = fnv1a(rows[b].path);
        return ha != hb ? ha < hb : rows[a].path < rows[b].path;
      });
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if ((r % sel.split->k == sel.split->index) == sel.split->take_test) chosen.push_back(idx[r]);
      }
    }
    std::sort(chosen.begin(), chosen.end());
    kept = std::move(chosen);
  }
  std::vector<ManifestRecord> out;
  for (auto i : kept) out.push_back(rows[i]);
  return out;
}

std::vector<Recording> load_recordings(const std::filesystem::path& manifest, const Selector& sel) {
  const auto base = manifest.parent_path();
  std::vector<Recording> out;
  for (const auto& r : select_records(read_manifest(manifest), sel)) {
    const std::filesystem::path p(r.path);
    Recording rec;
    rec.audio = load_wav(p.is_absolute() ? p : base / p);
    rec.label = r.key_label;
    rec.meta = r.meta;
    rec.onsets_s = r.onsets_s;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace keytap
