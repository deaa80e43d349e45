#pragma once

#include <vector>

#include "keytap/signal.hpp"

namespace keytap {

struct KeystrokeSegment {
  double onset_s = 0.0;
  AudioBuffer waveform;
  double nominal_length_s = 0.100;
};

struct SegmenterConfig {
  double energy_window_s = 0.010;
  double threshold = 50.0;
  double segment_length_s = 0.100;
  double refractory_s = 0.100;
  bool remove_dc = false;  // subtract the recording mean before detection

  void validate() const;
};

struct WindowEnergy {
  double start_s;
  double energy;
};

// Energy per non-overlapping window: the sum of one-sided FFT magnitudes of
// the (rectangular-windowed) samples. Trailing partial windows are ignored.
std::vector<WindowEnergy> window_energy(const AudioBuffer& buf, const SegmenterConfig& cfg);

// Press-peak detection. An onset is the start of the first window whose
// energy reaches the threshold at least refractory_s after the previous
// onset. Each segment runs segment_length_s from its onset, cut short by the
// next onset or the end of the buffer.
std::vector<KeystrokeSegment> detect_keystrokes(const AudioBuffer& buf, const SegmenterConfig& cfg);

struct Calibration {
  SegmenterConfig config;
  std::size_t achieved_count = 0;
  bool exact = false;  // false: closest achievable count, not the requested one
};

// Picks a threshold from the window-energy values so that detection yields
// `expected_count` segments, or the closest achievable count.
Calibration calibrate_threshold(const AudioBuffer& buf, std::size_t expected_count,
                                const SegmenterConfig& cfg);

}  // namespace keytap
