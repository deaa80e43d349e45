#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace keytap {

// Mono sample sequence at a fixed rate. Samples are nominally in [-1, 1].
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(std::vector<double> samples, double sample_rate);

  std::span<const double> samples() const noexcept { return samples_; }
  std::vector<double>& mutable_samples() noexcept { return samples_; }
  double sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples_.size()) / sample_rate_;
  }

  // Copy of [begin, begin + count), clipped to the buffer end.
  AudioBuffer slice(std::size_t begin, std::size_t count) const;

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  std::vector<double> samples_;
  double sample_rate_ = 44100.0;
};

struct Frame {
  std::size_t start_index = 0;
  std::vector<double> samples;
  double window_seconds = 0.0;
};

// One-sided magnitude spectrum: fft_size / 2 + 1 bins.
struct Spectrum {
  std::vector<double> magnitudes;
  double bin_hz = 0.0;
};

enum class WindowKind { kHamming, kRectangular };

// Number of samples spanned by a duration, rounded to nearest.
std::size_t samples_for(double seconds, double sample_rate);

std::size_t next_pow2(std::size_t n);
bool is_pow2(std::size_t n);

double rms(std::span<const double> x);
double peak(std::span<const double> x);

// Scales to unit RMS. Throws DegenerateInputError on an all-zero buffer.
AudioBuffer normalize_rms(const AudioBuffer& buf);

// Subtracts the sample mean. Off by default everywhere in the pipeline.
AudioBuffer remove_dc(const AudioBuffer& buf);

// Frames start at 0, S, 2S, ...; trailing partial windows are dropped.
std::vector<Frame> frame_signal(const AudioBuffer& buf, double window_s, double step_s);

std::size_t frame_count(std::size_t n, std::size_t window, std::size_t step);

std::vector<double> window_coefficients(WindowKind kind, std::size_t n);

// In-place iterative radix-2 transform. `inverse` applies the 1/N scale.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse = false);

// Windowed, zero-padded transform of `samples`; returns one-sided magnitudes.
std::vector<double> one_sided_magnitudes(std::span<const double> samples,
                                         std::size_t fft_size,
                                         WindowKind window);

Spectrum magnitude_spectrum(const Frame& frame, std::size_t fft_size,
                            double sample_rate,
                            WindowKind window = WindowKind::kHamming);

}  // namespace keytap
