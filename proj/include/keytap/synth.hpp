#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "keytap/dataset.hpp"
#include "keytap/recording.hpp"

namespace keytap {

struct Mode {
  double freq_hz;
  double amplitude;
  double decay_s;
};

struct KeyFingerprint {
  std::string key;
  std::vector<Mode> modes;
  double transient_s = 0.0005;
};

struct CorpusSpec {
  int models = 1;
  int units_per_model = 1;
  int users = 1;
  std::vector<TypingStyle> styles{TypingStyle::kTouch};
  std::string keys = "abcdefghijklmnopqrstuvwxyz";
  int samples_per_key = 10;

  // Distance between the keys of one model; 0 makes all keys identical.
  double separation = 1.0;
  double fmin_hz = 400.0;
  double fmax_hz = 8000.0;
  int min_modes = 4;
  int max_modes = 8;
  double amp_rolloff = 0.8;         // mode amplitude ~ (f / fmin)^-amp_rolloff
  double key_freq_spread = 0.005;  // relative frequency offset per unit of separation
  double key_amp_spread_db = 6.0;  // amplitude offset per unit of separation
  double key_decay_spread = 0.2;   // log decay-time offset per unit of separation
  double decay_min_s = 0.010;
  double decay_max_s = 0.040;

  double unit_freq_jitter = 0.02;
  double unit_amp_jitter_db = 1.0;
  double user_amp_jitter_db = 4.0;
  double sample_freq_jitter = 0.002;
  double sample_amp_jitter_db = 1.0;
  double click_level = 0.3;         // press click peak relative to the modal peak
  double release_level = 0.25;      // release peak relative to the press
  double snr_db = 30.0;             // over the first 100 ms of the press

  double sample_rate = 44100.0;
  double clip_s = 0.200;            // audio after the onset in a clip
  double lead_min_s = 0.010;
  double lead_max_s = 0.030;
  double session_spacing_s = 0.500;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t clip_count() const;
};

nlohmann::json to_json(const CorpusSpec& spec);
// Missing keys keep their defaults; unknown keys are a ContractError.
CorpusSpec corpus_spec_from_json(const nlohmann::json& j);

std::string model_name(int m);
std::string unit_name(int m, int u);
std::string user_name(int u);

// Fingerprint of `key` on a given unit as played by a given user.
KeyFingerprint key_fingerprint(const CorpusSpec& spec, int model, int unit, int user, std::size_t key);

// One clip per (model, unit, user, style, repetition, key), in that nesting
// order. Each clip holds a noise lead-in, then the keystroke; onsets_s has
// the true press onset.
std::vector<Recording> generate_clips(const CorpusSpec& spec);

// One session per (model, unit, user, style, repetition): every key typed
// once in order at session_spacing_s, same keystrokes as the clips.
std::vector<Recording> generate_sessions(const CorpusSpec& spec);

struct CorpusFiles {
  std::filesystem::path manifest;
  std::filesystem::path sessions;
  std::size_t clips = 0;
  std::size_t session_count = 0;
};

// Writes clips/*.wav, sessions/*.wav (PCM 32-bit), manifest.jsonl,
// sessions.jsonl and spec.json under `dir`.
CorpusFiles write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir);

// Speech-like signal without pauses: voiced segments with moving formants
// and unvoiced noise segments.
AudioBuffer synth_voice(double seconds, double sample_rate, std::uint64_t seed);

}  // namespace keytap
