#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "keytap/biquad.hpp"
#include "keytap/channel.hpp"
#include "keytap/errors.hpp"

using namespace keytap;

namespace {

constexpr double kRate = 44100.0;

std::vector<double> sine(double f, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / kRate);
  return x;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

// Steady-state RMS ratio of a sine through the sections, skipping the transient.
double measured_gain(double f, const std::vector<Biquad>& sections) {
  const auto x = sine(f, 44100);
  const auto y = filter_cascade(x, sections);
  const std::span<const double> xs(x.data() + 22050, 22050), ys(y.data() + 22050, 22050);
  return rms(ys) / rms(xs);
}

}  // namespace

TEST_CASE("biquad responses") {
  SUBCASE("butterworth q factors") {
    const auto q2 = butterworth_qs(2);
    REQUIRE(q2.size() == 1);
    CHECK(q2[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    // Pole-pair Q of an order-n Butterworth: 1 / (2 cos(theta_k)), theta_k = (2k+1) pi / (2n).
    const auto q8 = butterworth_qs(8);
    REQUIRE(q8.size() == 4);
    std::vector<double> want;
    for (int k = 0; k < 4; ++k) want.push_back(1.0 / (2.0 * std::cos((2 * k + 1) * std::numbers::pi / 16.0)));
    std::sort(want.begin(), want.end());
    auto got = q8;
    std::sort(got.begin(), got.end());
    for (int k = 0; k < 4; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-9));
  }
  SUBCASE("eighth-order low-pass: unit DC gain, -3 dB at cutoff") {
    std::vector<Biquad> s;
    for (double q : butterworth_qs(8)) s.push_back(Biquad::lowpass(4000, q, kRate));
    double dc = 1.0, at_cut = 1.0;
    for (const auto& b : s) dc *= b.magnitude(0.0, kRate), at_cut *= b.magnitude(4000, kRate);
    CHECK(dc == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(20 * std::log10(at_cut) == doctest::Approx(-3.0103).epsilon(1e-3));
    CHECK(measured_gain(1000, s) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(measured_gain(8000, s) < 0.01);
  }
  SUBCASE("peaking filter reaches its gain at the center") {
    const auto b = Biquad::peaking(1000, 50, 5.0, kRate);
    CHECK(20 * std::log10(b.magnitude(1000, kRate)) == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(b.magnitude(5000, kRate) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(20 * std::log10(measured_gain(1000, {b})) == doctest::Approx(5.0).epsilon(0.02));
  }
  SUBCASE("zero-gain peaking filter is the identity") {
    const auto x = noise(4410, 3);
    const auto y = filter_cascade(x, std::vector<Biquad>{Biquad::peaking(700, 50, 0.0, kRate)});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-6));
  }
}

TEST_CASE("channel config") {
  SUBCASE("table points") {
    const auto c70 = ChannelConfig::for_bitrate(70);
    CHECK(c70.cutoff_hz == 20000);
    CHECK(c70.loss_rate == 0.0);
    const auto c20 = ChannelConfig::for_bitrate(20);
    CHECK(c20.cutoff_hz == 4000);
    CHECK(c20.loss_rate == doctest::Approx(0.15));
  }
  SUBCASE("interpolates between points") {
    const auto c = ChannelConfig::for_bitrate(25);
    CHECK(c.cutoff_hz == doctest::Approx(5000));
    CHECK(c.loss_rate == doctest::Approx(0.10));
  }
  SUBCASE("cutoff and loss are monotone in bitrate") {
    double prev_cut = 0, prev_loss = 1;
    for (double k = 20; k <= 70; k += 2.5) {
      const auto c = ChannelConfig::for_bitrate(k);
      CHECK(c.cutoff_hz >= prev_cut);
      CHECK(c.loss_rate <= prev_loss);
      prev_cut = c.cutoff_hz, prev_loss = c.loss_rate;
    }
  }
  SUBCASE("out-of-range bitrate is a contract error") {
    CHECK_THROWS_AS(ChannelConfig::for_bitrate(10), ContractError);
    CHECK_THROWS_AS(ChannelConfig::for_bitrate(80), ContractError);
    ChannelConfig c;
    c.filter_order = 3;
    CHECK_THROWS_AS(c.validate(), ContractError);
  }
}

TEST_CASE("simulate_channel") {
  const AudioBuffer in(noise(44100, 7), kRate);
  SUBCASE("identity channel is exact") {
    const auto out = simulate_channel(in, ChannelConfig::identity());
    REQUIRE(out.size() == in.size());
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out.samples()[i] == in.samples()[i]);
  }
  SUBCASE("never exceeds the input peak") {
    const auto out = simulate_channel(in, ChannelConfig::for_bitrate(20, 1));
    CHECK(peak(out.samples()) <= peak(in.samples()));
    CHECK(out.size() == in.size());
  }
  SUBCASE("packet loss fraction") {
    auto cfg = ChannelConfig::identity();
    cfg.loss_rate = 0.15;
    cfg.seed = 11;
    const AudioBuffer ones(std::vector<double>(44100 * 20, 1.0), kRate);
    const auto out = simulate_channel(ones, cfg);
    std::size_t zeros = 0;
    for (double v : out.samples()) zeros += v == 0.0;
    const double frac = static_cast<double>(zeros) / static_cast<double>(out.size());
    // 1000 packets: sd of the fraction is about 0.011.
    CHECK(frac == doctest::Approx(0.15).epsilon(0.25));
  }
  SUBCASE("deterministic for a seed, varies across seeds") {
    const auto a = simulate_channel(in, ChannelConfig::for_bitrate(20, 5));
    const auto b = simulate_channel(in, ChannelConfig::for_bitrate(20, 5));
    const auto c = simulate_channel(in, ChannelConfig::for_bitrate(20, 6));
    CHECK(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin()));
    CHECK_FALSE(std::equal(a.samples().begin(), a.samples().end(), c.samples().begin()));
  }
}

TEST_CASE("mix_voice") {
  const AudioBuffer keys(noise(8820, 1), kRate);
  const AudioBuffer voice(sine(220, 44100, 0.5), kRate);
  SUBCASE("muted returns the keystrokes unchanged") {
    const auto out = mix_voice(keys, voice, {kMutedDb}, 3);
    for (std::size_t i = 0; i < keys.size(); ++i) CHECK(out.samples()[i] == keys.samples()[i]);
  }
  SUBCASE("0 dB adds voice at the keystroke RMS") {
    const auto out = mix_voice(keys, voice, {0.0}, 3);
    std::vector<double> added(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) added[i] = out.samples()[i] - keys.samples()[i];
    CHECK(rms(added) / rms(keys.samples()) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("-20 dB scales the voice by a tenth") {
    const auto out = mix_voice(keys, voice, {-20.0}, 3);
    std::vector<double> added(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) added[i] = out.samples()[i] - keys.samples()[i];
    CHECK(rms(added) / rms(keys.samples()) == doctest::Approx(0.1).epsilon(1e-9));
  }
  SUBCASE("short voice wraps and reports it") {
    bool wrapped = false;
    mix_voice(keys, AudioBuffer(sine(220, 1000), kRate), {0.0}, 3, &wrapped);
    CHECK(wrapped);
    mix_voice(keys, voice, {0.0}, 3, &wrapped);
    CHECK_FALSE(wrapped);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(mix_voice(keys, AudioBuffer(sine(220, 4800), 48000.0), {0.0}, 3), ContractError);
    CHECK_THROWS_AS(mix_voice(keys, AudioBuffer(std::vector<double>(44100, 0.0), kRate), {0.0}, 3),
                    DegenerateInputError);
    CHECK_THROWS_AS(mix_voice(keys, AudioBuffer({}, kRate), {0.0}, 3), DegenerateInputError);
  }
}
