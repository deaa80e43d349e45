#include "keytap/channel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "keytap/biquad.hpp"
#include "keytap/errors.hpp"

namespace keytap {

namespace {

struct BitratePoint {
  double kbps, cutoff_hz, loss;
};

constexpr std::array<BitratePoint, 6> kBitrateTable{{
    {20, 4000, 0.15},
    {30, 6000, 0.05},
    {40, 8000, 0.01},
    {50, 12000, 0.0},
    {60, 16000, 0.0},
    {70, 20000, 0.0},
}};

}  // namespace

ChannelConfig ChannelConfig::for_bitrate(double kbps, std::uint64_t seed) {
  if (!(kbps >= kBitrateTable.front().kbps && kbps <= kBitrateTable.back().kbps)) {
    throw ContractError("target_kbps must lie in [20, 70]");
  }
  ChannelConfig cfg;
  cfg.target_kbps = kbps;
  cfg.seed = seed;
  for (std::size_t i = 0; i + 1 < kBitrateTable.size(); ++i) {
    const auto& lo = kBitrateTable[i];
    const auto& hi = kBitrateTable[i + 1];
    if (kbps <= hi.kbps) {
      const double t = (kbps - lo.kbps) / (hi.kbps - lo.kbps);
      cfg.cutoff_hz = lo.cutoff_hz + t * (hi.cutoff_hz - lo.cutoff_hz);
      cfg.loss_rate = lo.loss + t * (hi.loss - lo.loss);
      break;
    }
  }
  return cfg;
}

ChannelConfig ChannelConfig::identity() {
  ChannelConfig cfg;
  cfg.cutoff_hz = std::numeric_limits<double>::infinity();
  cfg.loss_rate = 0.0;
  return cfg;
}

void ChannelConfig::validate() const {
  if (!(target_kbps >= 20 && target_kbps <= 70)) throw ContractError("target_kbps must lie in [20, 70]");
  if (!(packet_ms > 0)) throw ContractError("packet_ms must be positive");
  if (!(loss_rate >= 0 && loss_rate <= 1)) throw ContractError("loss_rate must lie in [0, 1]");
  if (!(cutoff_hz > 0)) throw ContractError("cutoff_hz must be positive");
  if (filter_order < 2 || filter_order % 2 != 0) throw ContractError("filter_order must be even and >= 2");
}

AudioBuffer simulate_channel(const AudioBuffer& buf, const ChannelConfig& cfg) {
  cfg.validate();
  const double rate = buf.sample_rate();
  std::vector<double> out(buf.samples().begin(), buf.samples().end());

  if (cfg.cutoff_hz < rate / 2) {
    std::vector<Biquad> sections;
    for (double q : butterworth_qs(cfg.filter_order)) sections.push_back(Biquad::lowpass(cfg.cutoff_hz, q, rate));
    out = filter_cascade(buf.samples(), sections);
    // Butterworth step response overshoots; keep the channel from amplifying.
    const double limit = peak(buf.samples());
    for (double& v : out) v = std::clamp(v, -limit, limit);
  }

  if (cfg.loss_rate > 0) {
    std::mt19937_64 rng(cfg.seed);
    std::bernoulli_distribution drop(cfg.loss_rate);
    const std::size_t packet = std::max<std::size_t>(1, samples_for(cfg.packet_ms / 1000.0, rate));
    for (std::size_t start = 0; start < out.size(); start += packet) {
      if (drop(rng)) {
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(start),
                  out.begin() + static_cast<std::ptrdiff_t>(std::min(out.size(), start + packet)), 0.0);
      }
    }
  }
  return AudioBuffer(std::move(out), rate);
}

AudioBuffer mix_voice(const AudioBuffer& keystrokes, const AudioBuffer& voice, const MixConfig& cfg,
                      std::uint64_t seed, bool* wrapped) {
  if (wrapped) *wrapped = false;
  if (std::isinf(cfg.relative_db) && cfg.relative_db < 0) return keystrokes;
  if (!std::isfinite(cfg.relative_db)) throw ContractError("relative_db must be finite or the muted sentinel");
  if (voice.sample_rate() != keystrokes.sample_rate()) throw ContractError("voice and keystroke sample rates differ");
  if (voice.size() == 0) throw DegenerateInputError("voice buffer is empty");
  if (keystrokes.size() == 0) return keystrokes;

  const std::size_t n = keystrokes.size();
  std::mt19937_64 rng(seed);
  const std::size_t span = voice.size() >= n ? voice.size() - n + 1 : voice.size();
  const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, span - 1)(rng);
  if (voice.size() < n && wrapped) *wrapped = true;

  std::vector<double> excerpt(n);
  const auto v = voice.samples();
  for (std::size_t i = 0; i < n; ++i) excerpt[i] = v[(offset + i) % v.size()];

  const double key_rms = rms(keystrokes.samples());
  const double voice_rms = rms(excerpt);
  if (key_rms == 0.0) throw DegenerateInputError("keystroke buffer is silent; relative level undefined");
  if (voice_rms == 0.0) throw DegenerateInputError("voice excerpt is silent");
  const double gain = key_rms * std::pow(10.0, cfg.relative_db / 20.0) / voice_rms;

  std::vector<double> out(keystrokes.samples().begin(), keystrokes.samples().end());
  for (std::size_t i = 0; i < n; ++i) out[i] += gain * excerpt[i];
  return AudioBuffer(std::move(out), keystrokes.sample_rate());
}

}  // namespace keytap
