#pragma once

#include <string>
#include <vector>

#include "keytap/segmenter.hpp"
#include "keytap/signal.hpp"

namespace keytap {

enum class FeatureKind { kMfcc, kFft, kCepstral };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

struct FeatureVector {
  std::vector<double> values;
  FeatureKind kind = FeatureKind::kMfcc;
  std::size_t frames = 0;        // 1 for FFT kind and for frame-averaged vectors
  std::size_t coefficients = 0;  // per frame
};

// Framing and spectral parameters shared by all three feature kinds.
struct MfccConfig {
  double window_s = 0.010;
  double step_s = 0.0025;
  std::size_t n_mels = 32;
  std::size_t n_coeffs = 32;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;        // 0 selects the Nyquist frequency
  std::size_t fft_size = 0;    // 0 selects the next power of two >= window
  WindowKind window = WindowKind::kHamming;
  double log_floor = 1e-10;
  bool concatenate_frames = true;  // false averages frames into one

  void validate(double sample_rate) const;
  std::size_t window_samples(double sample_rate) const;
  std::size_t step_samples(double sample_rate) const;
  std::size_t resolved_fft_size(double sample_rate) const;
  double resolved_fmax(double sample_rate) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with unit peak on the mel scale. Row m holds the weight
// of every one-sided FFT bin in filter m.
struct MelFilterbank {
  std::vector<std::vector<double>> weights;
  std::vector<double> centers_hz;
};

MelFilterbank mel_filterbank(const MfccConfig& cfg, double sample_rate);

// Filter energies (sum of weighted power-spectrum bins) for one frame.
std::vector<double> mel_energies(std::span<const double> frame, const MfccConfig& cfg,
                                 double sample_rate);

// Orthonormal DCT-II and its inverse.
std::vector<double> dct2(std::span<const double> x);
std::vector<double> idct2(std::span<const double> c);

// The segment is padded or truncated to nominal_length_s before framing, so
// every vector produced under one config has the same length.
FeatureVector mfcc(const KeystrokeSegment& seg, const MfccConfig& cfg);
FeatureVector fft_features(const KeystrokeSegment& seg, const MfccConfig& cfg);
FeatureVector cepstral_features(const KeystrokeSegment& seg, const MfccConfig& cfg);

struct FeatureConfig {
  FeatureKind kind = FeatureKind::kMfcc;
  MfccConfig spectral;
  bool normalize = true;  // RMS-normalize each segment before extraction
};

FeatureVector extract_features(const KeystrokeSegment& seg, const FeatureConfig& cfg);

}  // namespace keytap
