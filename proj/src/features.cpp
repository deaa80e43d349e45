#include "keytap/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "keytap/errors.hpp"

namespace keytap {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kMfcc: return "mfcc";
    case FeatureKind::kFft: return "fft";
    case FeatureKind::kCepstral: return "cepstral";
  }
  return "mfcc";
}

FeatureKind feature_kind_from_string(const std::string& name) {
  if (name == "mfcc") return FeatureKind::kMfcc;
  if (name == "fft") return FeatureKind::kFft;
  if (name == "cepstral") return FeatureKind::kCepstral;
  throw ContractError("unknown feature kind '" + name + "' (expected mfcc, fft or cepstral)");
}

std::size_t MfccConfig::window_samples(double sample_rate) const {
  return samples_for(window_s, sample_rate);
}

std::size_t MfccConfig::step_samples(double sample_rate) const {
  return samples_for(step_s, sample_rate);
}

std::size_t MfccConfig::resolved_fft_size(double sample_rate) const {
  return fft_size != 0 ? fft_size : next_pow2(window_samples(sample_rate));
}

double MfccConfig::resolved_fmax(double sample_rate) const {
  return fmax_hz > 0.0 ? fmax_hz : sample_rate / 2.0;
}

void MfccConfig::validate(double sample_rate) const {
  if (!(step_s > 0.0) || step_s > window_s) throw ContractError("feature framing needs 0 < step <= window");
  if (window_samples(sample_rate) < 1 || step_samples(sample_rate) < 1) {
    throw ContractError("feature window and step must span at least one sample");
  }
  if (n_mels < 1 || n_coeffs < 1) throw ContractError("n_mels and n_coeffs must be positive");
  if (n_coeffs > n_mels) throw ContractError("n_coeffs must not exceed n_mels");
  const double fmax = resolved_fmax(sample_rate);
  if (fmin_hz < 0.0 || !(fmin_hz < fmax) || fmax > sample_rate / 2.0) {
    throw ContractError("filterbank range must satisfy 0 <= fmin < fmax <= Nyquist");
  }
  const std::size_t n = resolved_fft_size(sample_rate);
  if (!is_pow2(n) || n < window_samples(sample_rate)) {
    throw ContractError("fft_size must be a power of two no smaller than the window");
  }
  if (!(log_floor > 0.0)) throw ContractError("log floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(const MfccConfig& cfg, double sample_rate) {
  const std::size_t fft = cfg.resolved_fft_size(sample_rate);
  const std::size_t bins = fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.resolved_fmax(sample_rate));

  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }

  MelFilterbank fb;
  fb.weights.assign(cfg.n_mels, std::vector<double>(bins, 0.0));
  fb.centers_hz.resize(cfg.n_mels);
  const double bin_hz = sample_rate / static_cast<double>(fft);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    fb.centers_hz[m] = center;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      if (f > left && f <= center) {
        fb.weights[m][k] = (f - left) / (center - left);
      } else if (f > center && f < right) {
        fb.weights[m][k] = (right - f) / (right - center);
      }
    }
  }
  return fb;
}

std::vector<double> dct2(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> c(n, 0.0);
  const double n_d = static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      acc += x[m] * std::cos(std::numbers::pi * static_cast<double>(j) * (static_cast<double>(m) + 0.5) / n_d);
    }
    c[j] = acc * std::sqrt((j == 0 ? 1.0 : 2.0) / n_d);
  }
  return c;
}

std::vector<double> idct2(std::span<const double> c) {
  const std::size_t n = c.size();
  std::vector<double> x(n, 0.0);
  const double n_d = static_cast<double>(n);
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += c[j] * std::sqrt((j == 0 ? 1.0 : 2.0) / n_d) *
             std::cos(std::numbers::pi * static_cast<double>(j) * (static_cast<double>(m) + 0.5) / n_d);
    }
    x[m] = acc;
  }
  return x;
}

namespace {

// Precomputed pieces reused across every frame of a segment.
struct SpectralPlan {
  std::size_t window = 0;
  std::size_t step = 0;
  std::size_t fft = 0;
  std::size_t nominal = 0;
  std::vector<double> taper;
};

SpectralPlan make_plan(const KeystrokeSegment& seg, const MfccConfig& cfg) {
  const double rate = seg.waveform.sample_rate();
  cfg.validate(rate);
  SpectralPlan plan;
  plan.window = cfg.window_samples(rate);
  plan.step = cfg.step_samples(rate);
  plan.fft = cfg.resolved_fft_size(rate);
  plan.nominal = std::max(plan.window, samples_for(seg.nominal_length_s, rate));
  if (seg.waveform.size() < plan.window) {
    throw DegenerateInputError("segment of " + std::to_string(seg.waveform.size()) +
                               " samples is shorter than one feature window (" +
                               std::to_string(plan.window) + " samples)");
  }
  plan.taper = window_coefficients(cfg.window, plan.window);
  return plan;
}

std::vector<double> fitted_samples(const KeystrokeSegment& seg, std::size_t nominal) {
  const auto s = seg.waveform.samples();
  std::vector<double> out(nominal, 0.0);
  std::copy_n(s.begin(), std::min(nominal, s.size()), out.begin());
  return out;
}

// Complex spectrum of one tapered, zero-padded frame.
std::vector<std::complex<double>> frame_spectrum(std::span<const double> frame, const SpectralPlan& plan) {
  std::vector<std::complex<double>> data(plan.fft);
  for (std::size_t i = 0; i < plan.window; ++i) data[i] = frame[i] * plan.taper[i];
  fft_inplace(data);
  return data;
}

// Nonzero bin range [first, last) of each filter.
std::vector<std::pair<std::size_t, std::size_t>> filter_support(const MelFilterbank& fb) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& w : fb.weights) {
    std::size_t first = 0, last = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] != 0.0) {
        if (last == 0) first = k;
        last = k + 1;
      }
    }
    out.emplace_back(first, last);
  }
  return out;
}

std::vector<double> mel_log_energies(const std::vector<std::complex<double>>& spectrum, const MelFilterbank& fb,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& support,
                                     double floor) {
  const std::size_t bins = fb.weights.empty() ? 0 : fb.weights.front().size();
  std::vector<double> power(bins);
  for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(spectrum[k]);
  std::vector<double> out(fb.weights.size());
  for (std::size_t m = 0; m < fb.weights.size(); ++m) {
    double e = 0.0;
    const auto& w = fb.weights[m];
    for (std::size_t k = support[m].first; k < support[m].second; ++k) e += w[k] * power[k];
    out[m] = std::log(e + floor);
  }
  return out;
}

FeatureVector assemble(std::vector<std::vector<double>> per_frame, FeatureKind kind, bool concatenate) {
  FeatureVector fv;
  fv.kind = kind;
  fv.coefficients = per_frame.empty() ? 0 : per_frame.front().size();
  if (concatenate) {
    fv.frames = per_frame.size();
    fv.values.reserve(fv.frames * fv.coefficients);
    for (const auto& f : per_frame) fv.values.insert(fv.values.end(), f.begin(), f.end());
  } else {
    fv.frames = 1;
    fv.values.assign(fv.coefficients, 0.0);
    for (const auto& f : per_frame) {
      for (std::size_t i = 0; i < f.size(); ++i) fv.values[i] += f[i];
    }
    for (double& v : fv.values) v /= static_cast<double>(per_frame.size());
  }
  return fv;
}

}  // namespace

std::vector<double> mel_energies(std::span<const double> frame, const MfccConfig& cfg, double sample_rate) {
  cfg.validate(sample_rate);
  SpectralPlan plan;
  plan.window = frame.size();
  plan.fft = cfg.resolved_fft_size(sample_rate);
  if (plan.fft < plan.window) throw ContractError("fft_size smaller than frame");
  plan.taper = window_coefficients(cfg.window, plan.window);
  const auto spectrum = frame_spectrum(frame, plan);
  const auto fb = mel_filterbank(cfg, sample_rate);
  std::vector<double> out(fb.weights.size(), 0.0);
  for (std::size_t m = 0; m < fb.weights.size(); ++m) {
    for (std::size_t k = 0; k < fb.weights[m].size(); ++k) out[m] += fb.weights[m][k] * std::norm(spectrum[k]);
  }
  return out;
}

FeatureVector mfcc(const KeystrokeSegment& seg, const MfccConfig& cfg) {
  const auto plan = make_plan(seg, cfg);
  const auto fb = mel_filterbank(cfg, seg.waveform.sample_rate());
  const auto support = filter_support(fb);
  const auto samples = fitted_samples(seg, plan.nominal);
  const std::size_t frames = frame_count(samples.size(), plan.window, plan.step);

  // Rows of the orthonormal DCT-II basis, truncated to the retained terms.
  const std::size_t n = cfg.n_mels;
  std::vector<double> basis(cfg.n_coeffs * n);
  for (std::size_t j = 0; j < cfg.n_coeffs; ++j) {
    const double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t m = 0; m < n; ++m) {
      basis[j * n + m] = scale * std::cos(std::numbers::pi * static_cast<double>(j) *
                                          (static_cast<double>(m) + 0.5) / static_cast<double>(n));
    }
  }

  std::vector<std::vector<double>> per_frame;
  per_frame.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto spectrum = frame_spectrum(std::span(samples).subspan(f * plan.step, plan.window), plan);
    const auto log_e = mel_log_energies(spectrum, fb, support, cfg.log_floor);
    std::vector<double> coeffs(cfg.n_coeffs, 0.0);
    for (std::size_t j = 0; j < cfg.n_coeffs; ++j) {
      for (std::size_t m = 0; m < n; ++m) coeffs[j] += basis[j * n + m] * log_e[m];
    }
    per_frame.push_back(std::move(coeffs));
  }
  return assemble(std::move(per_frame), FeatureKind::kMfcc, cfg.concatenate_frames);
}

FeatureVector fft_features(const KeystrokeSegment& seg, const MfccConfig& cfg) {
  const auto plan = make_plan(seg, cfg);
  const auto samples = fitted_samples(seg, plan.nominal);
  const std::size_t frames = frame_count(samples.size(), plan.window, plan.step);
  const std::size_t bins = plan.fft / 2 + 1;

  FeatureVector fv;
  fv.kind = FeatureKind::kFft;
  fv.frames = 1;
  fv.coefficients = bins;
  fv.values.assign(bins, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto spectrum = frame_spectrum(std::span(samples).subspan(f * plan.step, plan.window), plan);
    for (std::size_t k = 0; k < bins; ++k) fv.values[k] += std::abs(spectrum[k]);
  }
  for (double& v : fv.values) v /= static_cast<double>(frames);
  return fv;
}

FeatureVector cepstral_features(const KeystrokeSegment& seg, const MfccConfig& cfg) {
  const auto plan = make_plan(seg, cfg);
  if (cfg.n_coeffs > plan.fft) throw ContractError("n_coeffs exceeds the cepstrum length");
  const auto samples = fitted_samples(seg, plan.nominal);
  const std::size_t frames = frame_count(samples.size(), plan.window, plan.step);

  std::vector<std::vector<double>> per_frame;
  per_frame.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    auto spectrum = frame_spectrum(std::span(samples).subspan(f * plan.step, plan.window), plan);
    for (auto& c : spectrum) c = std::log(std::abs(c) + cfg.log_floor);
    fft_inplace(spectrum, /*inverse=*/true);
    std::vector<double> coeffs(cfg.n_coeffs);
    for (std::size_t i = 0; i < cfg.n_coeffs; ++i) coeffs[i] = spectrum[i].real();
    per_frame.push_back(std::move(coeffs));
  }
  return assemble(std::move(per_frame), FeatureKind::kCepstral, cfg.concatenate_frames);
}

FeatureVector extract_features(const KeystrokeSegment& seg, const FeatureConfig& cfg) {
  const KeystrokeSegment* source = &seg;
  KeystrokeSegment normalized;
  if (cfg.normalize && rms(seg.waveform.samples()) > 0.0) {
    normalized = KeystrokeSegment{seg.onset_s, normalize_rms(seg.waveform), seg.nominal_length_s};
    source = &normalized;
  }
  switch (cfg.kind) {
    case FeatureKind::kMfcc: return mfcc(*source, cfg.spectral);
    case FeatureKind::kFft: return fft_features(*source, cfg.spectral);
    case FeatureKind::kCepstral: return cepstral_features(*source, cfg.spectral);
  }
  throw ContractError("unknown feature kind");
}

}  // namespace keytap
