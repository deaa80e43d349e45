#include "keytap/countermeasure.hpp"

#include <random>

#include "keytap/biquad.hpp"
#include "keytap/errors.hpp"
#include "keytap/random.hpp"

namespace keytap {

void EqConfig::validate(double sample_rate) const {
  if (n_bands < 1) throw ContractError("n_bands must be >= 1");
  if (!(center_min_hz > 0 && center_min_hz < center_max_hz && center_max_hz < sample_rate / 2)) {
    throw ContractError("EQ centers must satisfy 0 < min < max < Nyquist");
  }
  if (!(q > 0)) throw ContractError("EQ q must be positive");
  if (!(gain_min_db <= gain_max_db)) throw ContractError("gain_min_db must not exceed gain_max_db");
}

std::vector<EqBand> draw_eq_bands(const EqConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> center(cfg.center_min_hz, cfg.center_max_hz);
  std::uniform_real_distribution<double> gain(cfg.gain_min_db, cfg.gain_max_db);
  std::vector<EqBand> bands(static_cast<std::size_t>(cfg.n_bands));
  for (auto& b : bands) {
    b.center_hz = center(rng);
    b.gain_db = cfg.gain_min_db == cfg.gain_max_db ? cfg.gain_min_db : gain(rng);
  }
  return bands;
}

AudioBuffer apply_eq(const AudioBuffer& buf, const std::vector<EqBand>& bands, double q) {
  std::vector<Biquad> sections;
  sections.reserve(bands.size());
  for (const auto& b : bands) sections.push_back(Biquad::peaking(b.center_hz, q, b.gain_db, buf.sample_rate()));
  return AudioBuffer(filter_cascade(buf.samples(), sections), buf.sample_rate());
}

KeystrokeSegment randomize_eq(const KeystrokeSegment& seg, const EqConfig& cfg) {
  cfg.validate(seg.waveform.sample_rate());
  KeystrokeSegment out = seg;
  out.waveform = apply_eq(seg.waveform, draw_eq_bands(cfg), cfg.q);
  return out;
}

std::string to_string(EqSeedMode mode) {
  return mode == EqSeedMode::kPerKeystroke ? "per-keystroke" : "per-recording";
}

EqSeedMode eq_seed_mode_from_string(const std::string& s) {
  if (s == "per-keystroke") return EqSeedMode::kPerKeystroke;
  if (s == "per-recording") return EqSeedMode::kPerRecording;
  throw ContractError("unknown seed mode '" + s + "' (per-keystroke|per-recording)");
}

std::uint64_t keystroke_seed(std::uint64_t base, std::uint64_t index) { return derive_seed(base, {index}); }

std::vector<KeystrokeSegment> randomize_eq_batch(const std::vector<KeystrokeSegment>& segs, const EqConfig& cfg,
                                                 EqSeedMode mode) {
  std::vector<KeystrokeSegment> out;
  out.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EqConfig c = cfg;
    if (mode == EqSeedMode::kPerKeystroke) c.seed = keystroke_seed(cfg.seed, i);
    out.push_back(randomize_eq(segs[i], c));
  }
  return out;
}

AudioBuffer defend_recording(const AudioBuffer& buf, const EqConfig& eq, const SegmenterConfig& seg,
                             EqSeedMode mode) {
  eq.validate(buf.sample_rate());
  if (mode == EqSeedMode::kPerRecording) return apply_eq(buf, draw_eq_bands(eq), eq.q);

  std::vector<std::size_t> cuts{0};
  for (const auto& k : detect_keystrokes(buf, seg)) {
    const std::size_t at = samples_for(k.onset_s, buf.sample_rate());
    if (at > cuts.back() && at < buf.size()) cuts.push_back(at);
  }
  cuts.push_back(buf.size());

  std::vector<double> out;
  out.reserve(buf.size());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    EqConfig c = eq;
    c.seed = keystroke_seed(eq.seed, i);
    const auto part = apply_eq(buf.slice(cuts[i], cuts[i + 1] - cuts[i]), draw_eq_bands(c), eq.q);
    out.insert(out.end(), part.samples().begin(), part.samples().end());
  }
  return AudioBuffer(std::move(out), buf.sample_rate());
}

}  // namespace keytap
