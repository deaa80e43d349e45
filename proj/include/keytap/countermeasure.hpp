#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keytap/segmenter.hpp"
#include "keytap/signal.hpp"

namespace keytap {

struct EqConfig {
  int n_bands = 100;
  double center_min_hz = 100.0;
  double center_max_hz = 3000.0;
  double q = 50.0;
  double gain_min_db = -5.0;
  double gain_max_db = 5.0;
  std::uint64_t seed = 0;

  void validate(double sample_rate) const;
};

struct EqBand {
  double center_hz;
  double gain_db;
};

// Centers uniform in Hz, gains uniform in dB.
std::vector<EqBand> draw_eq_bands(const EqConfig& cfg);

AudioBuffer apply_eq(const AudioBuffer& buf, const std::vector<EqBand>& bands, double q);

KeystrokeSegment randomize_eq(const KeystrokeSegment& seg, const EqConfig& cfg);

enum class EqSeedMode { kPerKeystroke, kPerRecording };

std::string to_string(EqSeedMode mode);
EqSeedMode eq_seed_mode_from_string(const std::string& s);

// Seed for the index-th keystroke of a batch.
std::uint64_t keystroke_seed(std::uint64_t base, std::uint64_t index);

std::vector<KeystrokeSegment> randomize_eq_batch(const std::vector<KeystrokeSegment>& segs, const EqConfig& cfg,
                                                 EqSeedMode mode = EqSeedMode::kPerKeystroke);

// Equalizes a whole recording. Per-keystroke mode detects keystrokes and
// gives every detected segment (and the lead-in before the first one) its
// own band draw; per-recording mode uses one draw for everything.
AudioBuffer defend_recording(const AudioBuffer& buf, const EqConfig& eq, const SegmenterConfig& seg,
                             EqSeedMode mode = EqSeedMode::kPerKeystroke);

}  // namespace keytap
