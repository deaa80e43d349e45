#include "keytap/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "keytap/errors.hpp"

namespace keytap {

void SegmenterConfig::validate() const {
  if (!(energy_window_s > 0.0) || !(segment_length_s > 0.0) || !(refractory_s > 0.0)) {
    throw ContractError("segmenter durations must be positive");
  }
  if (!(threshold > 0.0)) throw ContractError("segmenter threshold must be positive");
}

std::vector<WindowEnergy> window_energy(const AudioBuffer& buf, const SegmenterConfig& cfg) {
  const std::size_t window = std::max<std::size_t>(1, samples_for(cfg.energy_window_s, buf.sample_rate()));
  const std::size_t fft_size = next_pow2(window);
  const std::size_t count = buf.size() / window;
  std::vector<WindowEnergy> out;
  out.reserve(count);
  const auto s = buf.samples();
  for (std::size_t i = 0; i < count; ++i) {
    const auto mags = one_sided_magnitudes(s.subspan(i * window, window), fft_size, WindowKind::kRectangular);
    double e = 0.0;
    for (double m : mags) e += m;
    out.push_back({static_cast<double>(i * window) / buf.sample_rate(), e});
  }
  return out;
}

namespace {

std::vector<std::size_t> onset_windows(const std::vector<WindowEnergy>& energies, double threshold,
                                       double refractory_s) {
  std::vector<std::size_t> onsets;
  double last = -std::numeric_limits<double>::infinity();
  // Window starts are exact multiples of the window length; the small slack
  // keeps an onset exactly one refractory period later from being rejected.
  constexpr double kSlack = 1e-9;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (energies[i].energy >= threshold && energies[i].start_s - last >= refractory_s - kSlack) {
      onsets.push_back(i);
      last = energies[i].start_s;
    }
  }
  return onsets;
}

}  // namespace

std::vector<KeystrokeSegment> detect_keystrokes(const AudioBuffer& buf, const SegmenterConfig& cfg) {
  cfg.validate();
  if (cfg.remove_dc) {
    SegmenterConfig plain = cfg;
    plain.remove_dc = false;
    return detect_keystrokes(keytap::remove_dc(buf), plain);
  }
  const auto energies = window_energy(buf, cfg);
  const auto onsets = onset_windows(energies, cfg.threshold, cfg.refractory_s);
  const std::size_t window = std::max<std::size_t>(1, samples_for(cfg.energy_window_s, buf.sample_rate()));
  const std::size_t length = samples_for(cfg.segment_length_s, buf.sample_rate());

  std::vector<KeystrokeSegment> segments;
  segments.reserve(onsets.size());
  for (std::size_t k = 0; k < onsets.size(); ++k) {
    const std::size_t start = onsets[k] * window;
    std::size_t end = std::min(buf.size(), start + length);
    if (k + 1 < onsets.size()) end = std::min(end, onsets[k + 1] * window);
    segments.push_back({energies[onsets[k]].start_s, buf.slice(start, end - start), cfg.segment_length_s});
  }
  return segments;
}

Calibration calibrate_threshold(const AudioBuffer& buf, std::size_t expected_count,
                                const SegmenterConfig& cfg) {
  if (expected_count < 1) throw ContractError("expected_count must be at least 1");
  if (buf.empty()) throw DegenerateInputError("cannot calibrate on an empty buffer");
  if (cfg.remove_dc) {
    SegmenterConfig plain = cfg;
    plain.remove_dc = false;
    Calibration cal = calibrate_threshold(keytap::remove_dc(buf), expected_count, plain);
    cal.config.remove_dc = true;
    return cal;
  }

  const auto energies = window_energy(buf, cfg);
  std::vector<double> levels;
  for (const auto& e : energies) {
    if (e.energy > 0.0) levels.push_back(e.energy);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  Calibration best{cfg, 0, false};
  if (levels.empty()) {
    // Nothing can ever fire; any positive threshold yields zero detections.
    best.config.threshold = cfg.threshold > 0.0 ? cfg.threshold : 1.0;
    return best;
  }

  auto count_at = [&](std::size_t idx) {
    return onset_windows(energies, levels[idx], cfg.refractory_s).size();
  };

  // Detection count is non-increasing in the threshold: bisect the sorted
  // distinct levels for the lowest one whose count does not exceed the target.
  std::size_t lo = 0, hi = levels.size() - 1;
  if (count_at(hi) > expected_count) {
    lo = hi;
  } else if (count_at(0) <= expected_count) {
    hi = 0;
  } else {
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (count_at(mid) <= expected_count) hi = mid; else lo = mid;
    }
  }

  const std::size_t at_hi = count_at(hi);
  // Any threshold in (levels[hi-1], levels[hi]] selects the same windows.
  const double below = hi > 0 ? levels[hi - 1] : 0.0;
  best.config.threshold = below > 0.0 ? std::sqrt(below * levels[hi]) : 0.5 * levels[hi];
  best.achieved_count = at_hi;
  best.exact = at_hi == expected_count;
  if (!best.exact && hi > 0) {
    const std::size_t at_lo = count_at(hi - 1);
    const auto dist = [&](std::size_t n) {
      return n > expected_count ? n - expected_count : expected_count - n;
    };
    if (dist(at_lo) < dist(at_hi)) {
      const double lower = hi > 1 ? levels[hi - 2] : 0.0;
      best.config.threshold = lower > 0.0 ? std::sqrt(lower * levels[hi - 1]) : 0.5 * levels[hi - 1];
      best.achieved_count = at_lo;
    }
  }
  return best;
}

}  // namespace keytap
