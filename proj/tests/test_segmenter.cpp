#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "keytap/errors.hpp"
#include "keytap/segmenter.hpp"

using namespace keytap;

namespace {

constexpr double kRate = 44100.0;

std::vector<double> noise(std::size_t n, double level, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, level);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

void add_burst(std::vector<double>& x, double at_s, double length_s, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amp);
  const auto start = static_cast<std::size_t>(at_s * kRate);
  const auto len = static_cast<std::size_t>(length_s * kRate);
  for (std::size_t i = start; i < std::min(x.size(), start + len); ++i) x[i] += g(rng);
}

// Direct O(N^2) DFT magnitude sum, used as the energy oracle.
double oracle_energy(std::span<const double> w) {
  const std::size_t fft = 512;
  double e = 0.0;
  for (std::size_t k = 0; k <= fft / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) acc += w[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / fft);
    e += std::abs(acc);
  }
  return e;
}

SegmenterConfig config(double threshold, double refractory = 0.1) {
  SegmenterConfig c;
  c.threshold = threshold;
  c.refractory_s = refractory;
  return c;
}

}  // namespace

TEST_CASE("window_energy") {
  SUBCASE("silence has zero energy everywhere") {
    const auto e = window_energy(AudioBuffer(std::vector<double>(44100, 0.0), kRate), config(1.0));
    CHECK(e.size() == 100);
    for (const auto& w : e) CHECK(w.energy == 0.0);
  }
  SUBCASE("empty buffer gives empty sequence") {
    CHECK(window_energy(AudioBuffer({}, kRate), config(1.0)).empty());
  }
  SUBCASE("a 5 ms burst dominates its window and matches the oracle") {
    auto x = noise(44100, 0.001, 1);
    add_burst(x, 0.2025, 0.005, 0.5, 2);
    const AudioBuffer buf(x, kRate);
    const auto e = window_energy(buf, config(1.0));
    const std::size_t burst_window = 20;  // 0.2025 s lies in [0.200, 0.210)
    for (std::size_t i = 0; i < e.size(); ++i) {
      CHECK(e[i].energy == doctest::Approx(oracle_energy(buf.samples().subspan(i * 441, 441))).epsilon(1e-9));
      if (i != burst_window) CHECK(e[burst_window].energy > 10.0 * e[i].energy);
    }
  }
  SUBCASE("white noise windows stay within a sanity band of their mean") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto e = window_energy(AudioBuffer(noise(44100, 1.0, seed), kRate), config(1.0));
      double mean = 0.0;
      for (const auto& w : e) mean += w.energy;
      mean /= static_cast<double>(e.size());
      for (const auto& w : e) CHECK(std::abs(w.energy - mean) <= 0.5 * mean);
    }
  }
}

TEST_CASE("detect_keystrokes") {
  SUBCASE("silence yields nothing") {
    CHECK(detect_keystrokes(AudioBuffer(std::vector<double>(44100, 0.0), kRate), config(1.0)).empty());
  }
  SUBCASE("two bursts 60 ms apart truncate the first segment") {
    auto x = noise(44100, 0.0005, 3);
    add_burst(x, 0.100, 0.004, 0.5, 4);
    add_burst(x, 0.160, 0.004, 0.5, 5);
    const auto segs = detect_keystrokes(AudioBuffer(x, kRate), config(50.0, 0.02));
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].onset_s == doctest::Approx(0.100));
    CHECK(segs[1].onset_s == doctest::Approx(0.160));
    CHECK(segs[0].waveform.duration_seconds() == doctest::Approx(0.060));
    CHECK(segs[1].waveform.duration_seconds() == doctest::Approx(0.100));
  }
  SUBCASE("segment at the end of the buffer is truncated") {
    auto x = noise(4410 * 2, 0.0005, 6);
    add_burst(x, 0.150, 0.004, 0.5, 7);
    const auto segs = detect_keystrokes(AudioBuffer(x, kRate), config(50.0));
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].waveform.duration_seconds() == doctest::Approx(0.050));
  }
  SUBCASE("invalid config is rejected") {
    CHECK_THROWS_AS(detect_keystrokes(AudioBuffer(std::vector<double>(10), kRate), config(0.0)), ContractError);
  }
}

TEST_CASE("detection properties on random burst trains") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto x = noise(44100 * 2, 0.002, rng());
    std::uniform_real_distribution<double> at(0.0, 1.95);
    for (int b = 0; b < 12; ++b) add_burst(x, at(rng), 0.004, 0.3 + 0.3 * (b % 3), rng());
    const AudioBuffer buf(x, kRate);
    const double refractory = 0.02 + 0.01 * (trial % 8);
    const auto energies = window_energy(buf, config(1.0));

    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double threshold : {5.0, 20.0, 50.0, 100.0, 200.0, 400.0}) {
      const auto segs = detect_keystrokes(buf, config(threshold, refractory));
      CHECK(segs.size() <= previous);  // monotone in threshold
      previous = segs.size();
      for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto w = static_cast<std::size_t>(std::llround(segs[i].onset_s / 0.010));
        CHECK(energies[w].energy >= threshold);
        if (i + 1 < segs.size()) {
          CHECK(segs[i + 1].onset_s > segs[i].onset_s);
          CHECK(segs[i + 1].onset_s - segs[i].onset_s >= refractory - 1e-9);
          CHECK(segs[i].onset_s + segs[i].waveform.duration_seconds() <= segs[i + 1].onset_s + 1e-9);
        }
        CHECK(segs[i].waveform.duration_seconds() <= segs[i].nominal_length_s + 1e-9);
      }
    }
  }
}

TEST_CASE("calibrate_threshold") {
  SUBCASE("silence cannot reach one detection") {
    const auto c = calibrate_threshold(AudioBuffer(std::vector<double>(44100, 0.0), kRate), 1, config(1.0));
    CHECK_FALSE(c.exact);
    CHECK(c.achieved_count == 0);
  }
  SUBCASE("single burst lands between noise floor and burst energy") {
    auto x = noise(44100, 0.001, 8);
    add_burst(x, 0.5, 0.005, 0.5, 9);
    const AudioBuffer buf(x, kRate);
    const auto c = calibrate_threshold(buf, 1, config(1.0));
    REQUIRE(c.exact);
    CHECK(c.achieved_count == 1);
    const auto e = window_energy(buf, config(1.0));
    double floor_max = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (i != 50) floor_max = std::max(floor_max, e[i].energy);
    }
    CHECK(c.config.threshold > floor_max);
    CHECK(c.config.threshold <= e[50].energy);
    CHECK(detect_keystrokes(buf, c.config).size() == 1);
  }
  SUBCASE("empty buffer is degenerate") {
    CHECK_THROWS_AS(calibrate_threshold(AudioBuffer({}, kRate), 1, config(1.0)), DegenerateInputError);
  }
  SUBCASE("zero expected count is a contract error") {
    CHECK_THROWS_AS(calibrate_threshold(AudioBuffer(std::vector<double>(10), kRate), 0, config(1.0)), ContractError);
  }
}

TEST_CASE("remove_dc option") {
  auto x = noise(44100, 0.001, 21);
  add_burst(x, 0.2, 0.03, 0.3, 22);
  add_burst(x, 0.6, 0.03, 0.3, 23);
  std::vector<double> shifted = x;
  for (double& v : shifted) v += 0.5;
  auto cfg = config(20.0);
  const auto clean = detect_keystrokes(AudioBuffer(x, kRate), cfg);
  REQUIRE(clean.size() == 2);
  CHECK(detect_keystrokes(AudioBuffer(shifted, kRate), cfg).size() != 2);
  cfg.remove_dc = true;
  const auto fixed = detect_keystrokes(AudioBuffer(shifted, kRate), cfg);
  REQUIRE(fixed.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(fixed[i].onset_s == clean[i].onset_s);
  const auto cal = calibrate_threshold(AudioBuffer(shifted, kRate), 2, cfg);
  CHECK(cal.exact);
  CHECK(cal.config.remove_dc);
}
