#include "keytap/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <unordered_map>
#include <numbers>
#include <numeric>
#include <string>

#include "keytap/errors.hpp"

namespace keytap {

AudioBuffer::AudioBuffer(std::vector<double> samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (!(sample_rate > 0.0)) {
    throw ContractError("sample rate must be positive, got " + std::to_string(sample_rate));
  }
}

AudioBuffer AudioBuffer::slice(std::size_t begin, std::size_t count) const {
  begin = std::min(begin, samples_.size());
  const std::size_t end = std::min(samples_.size(), begin + count);
  return AudioBuffer(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                         samples_.begin() + static_cast<std::ptrdiff_t>(end)),
                     sample_rate_);
}

std::size_t samples_for(double seconds, double sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

std::size_t next_pow2(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

bool is_pow2(std::size_t n) { return std::has_single_bit(n); }

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double peak(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

AudioBuffer normalize_rms(const AudioBuffer& buf) {
  const double r = rms(buf.samples());
  if (r == 0.0) {
    throw DegenerateInputError("cannot normalize an all-zero buffer");
  }
  std::vector<double> out(buf.samples().begin(), buf.samples().end());
  for (double& v : out) v /= r;
  return AudioBuffer(std::move(out), buf.sample_rate());
}

AudioBuffer remove_dc(const AudioBuffer& buf) {
  if (buf.empty()) return buf;
  const auto s = buf.samples();
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  std::vector<double> out(s.begin(), s.end());
  for (double& v : out) v -= mean;
  return AudioBuffer(std::move(out), buf.sample_rate());
}

std::size_t frame_count(std::size_t n, std::size_t window, std::size_t step) {
  if (window == 0 || step == 0 || window > n) return 0;
  return (n - window) / step + 1;
}

std::vector<Frame> frame_signal(const AudioBuffer& buf, double window_s, double step_s) {
  if (!(step_s > 0.0) || step_s > window_s) {
    throw ContractError("frame step must satisfy 0 < step <= window");
  }
  const std::size_t window = samples_for(window_s, buf.sample_rate());
  const std::size_t step = samples_for(step_s, buf.sample_rate());
  if (window < 1 || step < 1) {
    throw ContractError("frame window and step must span at least one sample");
  }
  const std::size_t count = frame_count(buf.size(), window, step);
  std::vector<Frame> frames;
  frames.reserve(count);
  const auto s = buf.samples();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * step;
    frames.push_back(Frame{start, std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(start),
                                                      s.begin() + static_cast<std::ptrdiff_t>(start + window)),
                           window_s});
  }
  return frames;
}

std::vector<double> window_coefficients(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::kHamming && n > 1) {
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    }
  }
  return w;
}

void fft_inplace(std::vector<std::complex<double>>& data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (!is_pow2(n)) throw ContractError("FFT size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  // Twiddles for the full size, each computed directly from its index; stage
  // `len` reads every (n / len)-th entry.
  thread_local std::unordered_map<std::size_t, std::vector<std::complex<double>>> cache;
  auto& table = cache[n];
  if (table.empty()) {
    table.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      table[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = table[k * stride].real();
        const double wi = inverse ? -table[k * stride].imag() : table[k * stride].imag();
        const auto b = data[i + k + half];
        const std::complex<double> v(b.real() * wr - b.imag() * wi, b.real() * wi + b.imag() * wr);
        const auto u = data[i + k];
        data[i + k] = u + v;
        data[i + k + half] = u - v;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& c : data) c *= scale;
  }
}

std::vector<double> one_sided_magnitudes(std::span<const double> samples, std::size_t fft_size,
                                         WindowKind window) {
  if (!is_pow2(fft_size)) {
    throw ContractError("fft_size must be a power of two, got " + std::to_string(fft_size));
  }
  if (fft_size < samples.size()) {
    throw ContractError("fft_size " + std::to_string(fft_size) + " is smaller than the frame (" +
                        std::to_string(samples.size()) + " samples)");
  }
  thread_local std::map<std::pair<WindowKind, std::size_t>, std::vector<double>> windows;
  auto& w = windows[{window, samples.size()}];
  if (w.size() != samples.size()) w = window_coefficients(window, samples.size());
  std::vector<std::complex<double>> data(fft_size);
  for (std::size_t i = 0; i < samples.size(); ++i) data[i] = samples[i] * w[i];
  fft_inplace(data);
  std::vector<double> mags(fft_size / 2 + 1);
  for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(data[k]);
  return mags;
}

Spectrum magnitude_spectrum(const Frame& frame, std::size_t fft_size, double sample_rate,
                            WindowKind window) {
  return Spectrum{one_sided_magnitudes(frame.samples, fft_size, window),
                  sample_rate / static_cast<double>(fft_size)};
}

}  // namespace keytap
