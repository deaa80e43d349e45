#include "keytap/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "keytap/biquad.hpp"
#include "keytap/errors.hpp"
#include "keytap/io.hpp"
#include "keytap/manifest.hpp"
#include "keytap/random.hpp"
#include "keytap/wav.hpp"

namespace keytap {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum Stream : std::uint64_t { kModel = 1, kKey, kUnit, kUser, kSample, kNoise, kLead, kTiming };

// a fresh distribution per draw so cached normals never cross engines
double normal(std::mt19937_64& rng) { return std::normal_distribution<double>{}(rng); }

double db_gain(double db) { return std::pow(10.0, db / 20.0); }

std::uint64_t style_id(TypingStyle s) { return s == TypingStyle::kTouch ? 0 : 1; }

// per-press loudness jitter; larger spreads let loud releases outrank quiet presses
constexpr double kIntensityJitterDb = 1.0;

double style_timing_s(TypingStyle s) { return s == TypingStyle::kTouch ? 0.03 : 0.08; }

struct Keystroke {
  int model, unit, user;
  TypingStyle style;
  int repetition;
  std::size_t key;
};

// Adds one press (and its release) starting at sample `at`.
void render_keystroke(const CorpusSpec& spec, const Keystroke& k, std::vector<double>& out, std::size_t at) {
  const KeyFingerprint fp = key_fingerprint(spec, k.model, k.unit, k.user, k.key);
  std::mt19937_64 rng(derive_seed(spec.seed, {kSample, static_cast<std::uint64_t>(k.model),
                                              static_cast<std::uint64_t>(k.unit), static_cast<std::uint64_t>(k.user),
                                              style_id(k.style), static_cast<std::uint64_t>(k.repetition), k.key}));
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rate = spec.sample_rate;
  const double intensity = db_gain(kIntensityJitterDb * g(rng));

  struct Partial {
    double f, a, tau, phase;
  };
  std::vector<Partial> partials;
  double amp_sum = 0.0;
  for (const Mode& m : fp.modes) {
    Partial p{m.freq_hz * (1.0 + spec.sample_freq_jitter * g(rng)), m.amplitude * db_gain(spec.sample_amp_jitter_db * g(rng)),
              m.decay_s, kTwoPi * u(rng)};
    p.f = std::min(p.f, 0.45 * rate);
    partials.push_back(p);
  }
  // equal onset level for every key; loudness then varies only with intensity
  double norm = 0.0;
  for (const auto& p : partials) norm += p.a;
  for (auto& p : partials) p.a /= norm;
  amp_sum = 1.0;

  double longest = 0.0;
  for (const auto& p : partials) longest = std::max(longest, p.tau);
  const double click_tau = 0.0005;

  auto burst = [&](std::size_t start, double level) {
    if (start >= out.size()) return;
    const std::size_t len = std::min(out.size() - start, static_cast<std::size_t>(std::ceil(12.0 * longest * rate)));
    std::vector<double> v(len, 0.0);
    for (const auto& p : partials) {
      // damped sinusoid by the two-term recurrence x[n] = 2 r cos(w) x[n-1] - r^2 x[n-2]
      const double w = kTwoPi * p.f / rate, r = std::exp(-1.0 / (p.tau * rate));
      const double c1 = 2.0 * r * std::cos(w), c2 = -r * r;
      double x2 = p.a * std::sin(p.phase), x1 = p.a * r * std::sin(w + p.phase);
      if (len > 0) v[0] += x2;
      if (len > 1) v[1] += x1;
      for (std::size_t i = 2; i < len; ++i) {
        const double x = c1 * x1 + c2 * x2;
        v[i] += x;
        x2 = x1;
        x1 = x;
      }
    }
    const auto click_len = std::min(len, static_cast<std::size_t>(10 * click_tau * rate));
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / rate;
      double x = v[i] * (1.0 - std::exp(-t / fp.transient_s));
      if (i < click_len) x += spec.click_level * amp_sum * std::exp(-t / click_tau) * g(rng);
      out[start + i] += level * intensity * x;
    }
  };

  burst(at, 1.0);
  const double release_delay = 0.08 + 0.07 * u(rng);
  const double release_level = spec.release_level * (0.7 + 0.6 * u(rng));
  for (auto& p : partials) p.phase = kTwoPi * u(rng);
  burst(at + static_cast<std::size_t>(release_delay * rate), release_level);
}

double press_power(const std::vector<double>& x, std::size_t at, double rate) {
  const std::size_t end = std::min(x.size(), at + static_cast<std::size_t>(0.1 * rate));
  double s = 0.0;
  for (std::size_t i = at; i < end; ++i) s += x[i] * x[i];
  return end > at ? s / static_cast<double>(end - at) : 0.0;
}

void add_noise(std::vector<double>& x, double power, double snr_db, std::uint64_t seed) {
  if (!std::isfinite(snr_db)) return;
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  for (double& v : x) v += g(rng);
}

template <class F>
void for_each_recording(const CorpusSpec& spec, F&& f) {
  for (int m = 0; m < spec.models; ++m)
    for (int un = 0; un < spec.units_per_model; ++un)
      for (int us = 0; us < spec.users; ++us)
        for (TypingStyle st : spec.styles)
          for (int r = 0; r < spec.samples_per_key; ++r) f(m, un, us, st, r);
}

SampleMeta meta_for(int m, int un, int us, TypingStyle st) {
  SampleMeta meta;
  meta.user = user_name(us);
  meta.device_model = model_name(m);
  meta.device_unit = unit_name(m, un);
  meta.typing_style = st;
  return meta;
}

std::string rep_tag(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%02d", r);
  return buf;
}

}  // namespace

void CorpusSpec::validate() const {
  if (models < 1 || units_per_model < 1 || users < 1 || samples_per_key < 1) {
    throw ContractError("corpus counts must be >= 1");
  }
  if (styles.empty()) throw ContractError("corpus needs at least one typing style");
  if (keys.empty()) throw ContractError("corpus needs at least one key");
  if (std::set<char>(keys.begin(), keys.end()).size() != keys.size()) throw ContractError("corpus keys must be distinct");
  if (!(separation >= 0)) throw ContractError("separation must be >= 0");
  if (!(sample_rate > 0)) throw ContractError("sample_rate must be positive");
  if (!(fmin_hz > 0 && fmin_hz < fmax_hz && fmax_hz < sample_rate / 2)) {
    throw ContractError("mode range must satisfy 0 < fmin < fmax < Nyquist");
  }
  if (min_modes < 1 || max_modes < min_modes) throw ContractError("mode count range is invalid");
  if (!(decay_min_s > 0 && decay_min_s <= decay_max_s)) throw ContractError("decay range is invalid");
  if (!(clip_s > 0 && lead_min_s >= 0 && lead_min_s <= lead_max_s)) throw ContractError("clip timing is invalid");
  if (!(session_spacing_s > 0.2)) throw ContractError("session_spacing_s must exceed 0.2 s");
  if (unit_freq_jitter < 0 || unit_amp_jitter_db < 0 || user_amp_jitter_db < 0 || sample_freq_jitter < 0 ||
      sample_amp_jitter_db < 0 || amp_rolloff < 0 || key_decay_spread < 0 || key_freq_spread < 0 || key_amp_spread_db < 0 || click_level < 0 || release_level < 0) {
    throw ContractError("jitter and level parameters must be >= 0");
  }
}

std::size_t CorpusSpec::clip_count() const {
  return static_cast<std::size_t>(models) * units_per_model * users * styles.size() * samples_per_key * keys.size();
}

#define KEYTAP_SPEC_FIELDS(X)                                                                                      \
  X(models) X(units_per_model) X(users) X(keys) X(samples_per_key) X(separation) X(fmin_hz) X(fmax_hz) X(min_modes) \
  X(max_modes) X(amp_rolloff) X(key_freq_spread) X(key_amp_spread_db) X(key_decay_spread) X(decay_min_s) X(decay_max_s) X(unit_freq_jitter)          \
  X(unit_amp_jitter_db) X(user_amp_jitter_db) X(sample_freq_jitter) X(sample_amp_jitter_db) X(click_level)        \
  X(release_level) X(snr_db) X(sample_rate) X(clip_s) X(lead_min_s) X(lead_max_s) X(session_spacing_s) X(seed)

nlohmann::json to_json(const CorpusSpec& spec) {
  nlohmann::json j;
#define X(f) j[#f] = spec.f;
  KEYTAP_SPEC_FIELDS(X)
#undef X
  j["styles"] = nlohmann::json::array();
  for (auto s : spec.styles) j["styles"].push_back(to_string(s));
  return j;
}

CorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("corpus spec must be a JSON object");
  CorpusSpec spec;
  static const std::set<std::string> known = {
#define X(f) #f,
      KEYTAP_SPEC_FIELDS(X)
#undef X
          "styles"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ContractError("unknown corpus spec key '" + k + "'");
  }
  try {
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(spec.f);
    KEYTAP_SPEC_FIELDS(X)
#undef X
    if (j.contains("styles")) {
      spec.styles.clear();
      for (const auto& s : j.at("styles")) spec.styles.push_back(typing_style_from_string(s.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("corpus spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string model_name(int m) { return "model" + std::to_string(m); }
std::string unit_name(int m, int u) { return model_name(m) + "-unit" + std::to_string(u); }
std::string user_name(int u) { return "user" + std::to_string(u); }

KeyFingerprint key_fingerprint(const CorpusSpec& spec, int model, int unit, int user, std::size_t key) {
  if (key >= spec.keys.size()) throw ContractError("key index out of range");
  const auto m = static_cast<std::uint64_t>(model);

  std::mt19937_64 model_rng(derive_seed(spec.seed, {kModel, m}));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n_modes = std::uniform_int_distribution<int>(spec.min_modes, spec.max_modes)(model_rng);
  const double lmin = std::log(spec.fmin_hz), lmax = std::log(spec.fmax_hz);
  const double width = (lmax - lmin) / n_modes;

  std::mt19937_64 key_rng(derive_seed(spec.seed, {kKey, m, key}));
  std::mt19937_64 plate_rng(derive_seed(spec.seed, {kUnit, m, static_cast<std::uint64_t>(unit)}));
  std::mt19937_64 unit_rng(derive_seed(spec.seed, {kUnit, m, static_cast<std::uint64_t>(unit), key + 1}));
  std::mt19937_64 user_rng(derive_seed(spec.seed, {kUser, m, static_cast<std::uint64_t>(user), key}));

  KeyFingerprint fp;
  fp.key = std::string(1, spec.keys[key]);
  for (int i = 0; i < n_modes; ++i) {
    // plate mode of the model
    double f = std::exp(lmin + width * (i + u01(model_rng)));
    double a = std::pow(f / spec.fmin_hz, -spec.amp_rolloff) * (0.6 + 0.4 * u01(model_rng));
    double tau = spec.decay_min_s + (spec.decay_max_s - spec.decay_min_s) * u01(model_rng);
    // strike position of the key excites the modes differently
    a *= db_gain(spec.separation * spec.key_amp_spread_db * normal(key_rng));
    f *= 1.0 + spec.separation * spec.key_freq_spread * normal(key_rng);
    tau *= std::exp(spec.separation * spec.key_decay_spread * normal(key_rng));
    // manufacturing spread: the unit's plate modes shift together, each key's mechanism a little
    f *= 1.0 + spec.unit_freq_jitter * normal(plate_rng);
    a *= db_gain(spec.unit_amp_jitter_db * normal(unit_rng));
    // how this user strikes the key
    a *= db_gain(spec.user_amp_jitter_db * normal(user_rng));
    fp.modes.push_back(Mode{std::clamp(f, 50.0, 0.45 * spec.sample_rate), a, tau});
  }
  return fp;
}

std::vector<Recording> generate_clips(const CorpusSpec& spec) {
  spec.validate();
  std::vector<Recording> out;
  out.reserve(spec.clip_count());
  const double rate = spec.sample_rate;
  for_each_recording(spec, [&](int m, int un, int us, TypingStyle st, int r) {
    for (std::size_t k = 0; k < spec.keys.size(); ++k) {
      const std::uint64_t id[] = {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(un),
                                  static_cast<std::uint64_t>(us), style_id(st), static_cast<std::uint64_t>(r), k};
      std::mt19937_64 lead_rng(derive_seed(spec.seed, {kLead, id[0], id[1], id[2], id[3], id[4], id[5]}));
      const double lead = std::uniform_real_distribution<double>(spec.lead_min_s, spec.lead_max_s)(lead_rng);
      const auto at = static_cast<std::size_t>(std::llround(lead * rate));
      std::vector<double> x(at + static_cast<std::size_t>(std::llround(spec.clip_s * rate)), 0.0);
      render_keystroke(spec, Keystroke{m, un, us, st, r, k}, x, at);
      add_noise(x, press_power(x, at, rate), spec.snr_db,
                derive_seed(spec.seed, {kNoise, 0, id[0], id[1], id[2], id[3], id[4], id[5]}));

      Recording rec;
      rec.audio = AudioBuffer(std::move(x), rate);
      rec.label = std::string(1, spec.keys[k]);
      rec.meta = meta_for(m, un, us, st);
      rec.meta.source = rec.meta.device_unit + "/" + rec.meta.user + "/" + to_string(st) + "/" + rep_tag(r) + "/" + rec.label;
      rec.onsets_s = {static_cast<double>(at) / rate};
      out.push_back(std::move(rec));
    }
  });
  return out;
}

std::vector<Recording> generate_sessions(const CorpusSpec& spec) {
  spec.validate();
  std::vector<Recording> out;
  const double rate = spec.sample_rate;
  for_each_recording(spec, [&](int m, int un, int us, TypingStyle st, int r) {
    const std::uint64_t id[] = {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(un),
                                static_cast<std::uint64_t>(us), style_id(st), static_cast<std::uint64_t>(r)};
    std::mt19937_64 timing(derive_seed(spec.seed, {kTiming, id[0], id[1], id[2], id[3], id[4]}));
    std::uniform_real_distribution<double> jitter(-style_timing_s(st), style_timing_s(st));
    const double lead = 0.25;
    const std::size_t n = spec.keys.size();
    std::vector<double> x(static_cast<std::size_t>((lead + spec.session_spacing_s * static_cast<double>(n) + 0.3) * rate), 0.0);
    std::vector<double> onsets;
    double power = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = lead + spec.session_spacing_s * static_cast<double>(k) + jitter(timing);
      const auto at = static_cast<std::size_t>(std::llround(t * rate));
      onsets.push_back(static_cast<double>(at) / rate);
      render_keystroke(spec, Keystroke{m, un, us, st, r, k}, x, at);
    }
    for (double t : onsets) power += press_power(x, static_cast<std::size_t>(std::llround(t * rate)), rate);
    add_noise(x, power / static_cast<double>(n), spec.snr_db,
              derive_seed(spec.seed, {kNoise, 1, id[0], id[1], id[2], id[3], id[4]}));

    Recording rec;
    rec.audio = AudioBuffer(std::move(x), rate);
    rec.label = spec.keys;
    rec.meta = meta_for(m, un, us, st);
    rec.meta.source = rec.meta.device_unit + "/" + rec.meta.user + "/" + to_string(st) + "/" + rep_tag(r) + "/session";
    rec.onsets_s = std::move(onsets);
    out.push_back(std::move(rec));
  });
  return out;
}

CorpusFiles write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  // source "unit/user/style/rNN/key" becomes "unit_user_style_rNN_key.wav"
  auto file_name = [](const Recording& r) {
    std::string name;
    for (unsigned char c : r.meta.source) {
      if (c == '/') {
        name += '_';
      } else if (std::isalnum(c) || c == '-') {
        name += static_cast<char>(c);
      } else {
        char hex[8];
        std::snprintf(hex, sizeof hex, "x%02X", c);
        name += hex;
      }
    }
    return name + ".wav";
  };
  std::vector<ManifestRecord> clips, sessions;
  for (const auto& r : generate_clips(spec)) {
    const std::string rel = "clips/" + file_name(r);
    save_wav(dir / rel, r.audio, WavEncoding::kPcm32);
    clips.push_back(ManifestRecord{rel, r.label, r.meta, r.onsets_s});
  }
  for (const auto& r : generate_sessions(spec)) {
    const std::string rel = "sessions/" + file_name(r);
    save_wav(dir / rel, r.audio, WavEncoding::kPcm32);
    sessions.push_back(ManifestRecord{rel, r.label, r.meta, r.onsets_s});
  }
  CorpusFiles files{dir / "manifest.jsonl", dir / "sessions.jsonl", clips.size(), sessions.size()};
  write_manifest(files.manifest, clips);
  write_manifest(files.sessions, sessions);
  write_file_atomic(dir / "spec.json", to_json(spec).dump(2) + "\n");
  return files;
}

AudioBuffer synth_voice(double seconds, double sample_rate, std::uint64_t seed) {
  if (!(seconds > 0) || !(sample_rate > 0)) throw ContractError("synth_voice needs positive duration and rate");
  const auto total = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> out(total, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  const std::size_t fade = static_cast<std::size_t>(0.01 * sample_rate);
  const double nyq = sample_rate / 2;
  const double noise_top = std::min(10000.0, 0.45 * sample_rate);
  const double noise_bottom = std::min(2500.0, 0.2 * sample_rate);

  std::size_t pos = 0;
  while (pos < total) {
    const auto len = static_cast<std::size_t>((0.08 + 0.17 * u(rng)) * sample_rate);
    std::vector<double> seg(len + fade, 0.0);
    const bool voiced = u(rng) < 0.75;
    if (voiced) {
      const double f0a = 90 + 130 * u(rng), f0b = f0a * (0.85 + 0.3 * u(rng));
      const double formant[3] = {300 + 600 * u(rng), 900 + 1600 * u(rng), 2300 + 1200 * u(rng)};
      const double bw[3] = {80, 120, 180};
      const int harmonics = static_cast<int>(std::min(5000.0, 0.45 * sample_rate) / std::max(f0a, f0b));
      for (int h = 1; h <= harmonics; ++h) {
        double phase = kTwoPi * u(rng);
        for (std::size_t i = 0; i < seg.size(); ++i) {
          const double f0 = f0a + (f0b - f0a) * static_cast<double>(i) / static_cast<double>(seg.size());
          const double f = h * f0;
          double env = 0.0;
          for (int k = 0; k < 3; ++k) env += 1.0 / (1.0 + std::pow((f - formant[k]) / bw[k], 2));
          phase += kTwoPi * f / sample_rate;
          seg[i] += (env + 0.02) * std::sin(phase);
        }
      }
    }
    // aspiration / frication noise
    std::vector<double> noise(seg.size());
    for (double& v : noise) v = g(rng);
    std::vector<Biquad> wide, low;
    for (double q : butterworth_qs(4)) {
      wide.push_back(Biquad::lowpass(std::min(noise_top, 0.99 * nyq), q, sample_rate));
      low.push_back(Biquad::lowpass(noise_bottom, q, sample_rate));
    }
    const auto a = filter_cascade(noise, wide), b = filter_cascade(noise, low);
    const double seg_rms = std::sqrt(std::inner_product(seg.begin(), seg.end(), seg.begin(), 0.0) / seg.size());
    const double noise_level = voiced ? 0.35 : 1.0;
    const double scale = voiced ? seg_rms : 1.0;
    for (std::size_t i = 0; i < seg.size(); ++i) seg[i] += noise_level * scale * (a[i] - b[i]);

    const double level = std::pow(10.0, (-4.0 + 8.0 * u(rng)) / 20.0);
    const double r = std::sqrt(std::inner_product(seg.begin(), seg.end(), seg.begin(), 0.0) / seg.size());
    for (std::size_t i = 0; i < seg.size() && pos + i < total; ++i) {
      double w = 1.0;
      if (i < fade) w = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / fade);
      if (i >= len) w = 0.5 + 0.5 * std::cos(std::numbers::pi * static_cast<double>(i - len) / fade);
      out[pos + i] += w * level * seg[i] / (r > 0 ? r : 1.0);
    }
    pos += len;
  }
  const double p = peak(out);
  if (p > 0) {
    for (double& v : out) v *= 0.5 / p;
  }
  return AudioBuffer(std::move(out), sample_rate);
}

}  // namespace keytap
