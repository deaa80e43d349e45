#pragma once

#include <cstdint>
#include <limits>

#include "keytap/signal.hpp"

namespace keytap {

// VoIP channel proxy: low-pass at cutoff_hz, then per-packet loss.
struct ChannelConfig {
  double target_kbps = 70.0;
  double packet_ms = 20.0;
  double loss_rate = 0.0;
  double cutoff_hz = 20000.0;  // >= Nyquist bypasses the filter
  int filter_order = 8;
  std::uint64_t seed = 0;

  // Cutoff and loss from the bitrate table, linear between table points:
  // 70 -> 20 kHz/0, 60 -> 16 kHz/0, 50 -> 12 kHz/0, 40 -> 8 kHz/1%,
  // 30 -> 6 kHz/5%, 20 -> 4 kHz/15%.
  static ChannelConfig for_bitrate(double kbps, std::uint64_t seed = 0);
  // No filtering, no loss.
  static ChannelConfig identity();

  void validate() const;
};

AudioBuffer simulate_channel(const AudioBuffer& buf, const ChannelConfig& cfg);

inline constexpr double kMutedDb = -std::numeric_limits<double>::infinity();

struct MixConfig {
  double relative_db = 0.0;  // voice RMS over keystroke RMS; kMutedDb mutes the voice
};

// Adds a seeded random excerpt of `voice` scaled to the requested level.
// A voice shorter than the keystroke buffer wraps around and sets *wrapped.
AudioBuffer mix_voice(const AudioBuffer& keystrokes, const AudioBuffer& voice, const MixConfig& cfg,
                      std::uint64_t seed, bool* wrapped = nullptr);
}  // namespace keytap
