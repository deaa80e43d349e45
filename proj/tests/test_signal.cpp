#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "keytap/errors.hpp"
#include "keytap/signal.hpp"
#include "keytap/wav.hpp"

using namespace keytap;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "keytap_test_signal";
  fs::create_directories(dir);
  return dir / name;
}

// Minimal WAV writer independent of save_wav, for reader tests.
void write_raw_wav(const fs::path& path, std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                   std::uint16_t bits, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  out << "RIFF";
  u32(36 + static_cast<std::uint32_t>(data.size()));
  out << "WAVEfmt ";
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out << "data";
  u32(static_cast<std::uint32_t>(data.size()));
  out << data;
}

template <typename T>
void append(std::string& s, T v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

TEST_CASE("load_wav reads one second of 32-bit PCM silence") {
  std::string data;
  for (int i = 0; i < 44100; ++i) append<std::int32_t>(data, 0);
  const auto p = temp_path("silence32.wav");
  write_raw_wav(p, 1, 1, 44100, 32, data);
  const auto buf = load_wav(p);
  CHECK(buf.size() == 44100);
  CHECK(buf.sample_rate() == 44100.0);
  CHECK(peak(buf.samples()) == 0.0);
}

TEST_CASE("stereo mixdown of opposite constants is zero") {
  std::string data;
  for (int i = 0; i < 100; ++i) {
    append<float>(data, 0.5f);
    append<float>(data, -0.5f);
  }
  const auto p = temp_path("stereo.wav");
  write_raw_wav(p, 3, 2, 8000, 32, data);
  const auto buf = load_wav(p);
  REQUIRE(buf.size() == 100);
  for (double v : buf.samples()) CHECK(v == 0.0);
}

TEST_CASE("16-bit full-scale square wave reads back bit-exactly") {
  std::string data;
  for (int i = 0; i < 64; ++i) append<std::int16_t>(data, (i % 2 == 0) ? 32767 : -32767);
  const auto p = temp_path("square16.wav");
  write_raw_wav(p, 1, 1, 22050, 16, data);
  const auto buf = load_wav(p);
  REQUIRE(buf.size() == 64);
  for (std::size_t i = 0; i < 64; ++i) CHECK(buf.samples()[i] == ((i % 2 == 0) ? 32767.0 / 32768.0 : -32767.0 / 32768.0));
}

TEST_CASE("load_wav error paths") {
  SUBCASE("unsupported encoding names itself") {
    std::string data(30, '\0');
    const auto p = temp_path("pcm24.wav");
    write_raw_wav(p, 1, 1, 44100, 24, data);
    try {
      load_wav(p);
      FAIL("expected UnsupportedEncodingError");
    } catch (const UnsupportedEncodingError& e) {
      CHECK(e.encoding() == "PCM 24-bit");
    }
  }
  SUBCASE("truncated data chunk reports an offset") {
    std::string data;
    for (int i = 0; i < 10; ++i) append<std::int16_t>(data, 1);
    const auto p = temp_path("trunc.wav");
    write_raw_wav(p, 1, 1, 44100, 16, data);
    fs::resize_file(p, fs::file_size(p) - 6);
    CHECK_THROWS_AS(load_wav(p), ParseError);
  }
  SUBCASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_wav(temp_path("nope.wav")), IoError);
  }
}

TEST_CASE("save/load round trips") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> s(1000);
  for (double& v : s) v = static_cast<double>(static_cast<float>(u(rng)));
  const AudioBuffer buf(s, 48000.0);

  const auto pf = temp_path("rt_float.wav");
  save_wav(pf, buf, WavEncoding::kFloat32);
  CHECK(load_wav(pf) == buf);

  const auto p16 = temp_path("rt_16.wav");
  save_wav(p16, buf, WavEncoding::kPcm16);
  const auto back = load_wav(p16);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(back.samples()[i] - s[i]) <= 1.0 / 32768.0);

  const auto p32 = temp_path("rt_32.wav");
  save_wav(p32, buf, WavEncoding::kPcm32);
  const auto back32 = load_wav(p32);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(back32.samples()[i] - s[i]) <= 1.0 / 2147483648.0);
}

TEST_CASE("normalize_rms") {
  SUBCASE("constant 0.5 becomes 1.0") {
    const auto out = normalize_rms(AudioBuffer(std::vector<double>(50, 0.5), 1000.0));
    for (double v : out.samples()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("sine of amplitude A becomes amplitude sqrt(2)") {
    // Whole periods of 400 samples, so the sampled peak is the true peak.
    std::vector<double> s(4000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.3 * std::sin(2.0 * std::numbers::pi * 100.0 * static_cast<double>(i) / 40000.0);
    const auto out = normalize_rms(AudioBuffer(s, 40000.0));
    CHECK(rms(out.samples()) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(peak(out.samples()) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  }
  SUBCASE("all-zero buffer is degenerate") {
    CHECK_THROWS_AS(normalize_rms(AudioBuffer(std::vector<double>(10, 0.0), 1000.0)), DegenerateInputError);
  }
  SUBCASE("idempotent") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> s(257);
      for (double& v : s) v = g(rng) * 7.0;
      const auto once = normalize_rms(AudioBuffer(s, 1000.0));
      const auto twice = normalize_rms(once);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(twice.samples()[i] == doctest::Approx(once.samples()[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("frame_signal counts and coverage") {
  CHECK(frame_signal(AudioBuffer(std::vector<double>(441000), 44100.0), 0.010, 0.0025).size() ==
        (441000 - 441) / 110 + 1);
  CHECK((441000 - 441) / 110 + 1 == 4006);
  CHECK(frame_signal(AudioBuffer(std::vector<double>(441), 44100.0), 0.010, 0.0025).size() == 1);
  CHECK(frame_signal(AudioBuffer(std::vector<double>(100), 44100.0), 0.010, 0.0025).empty());
  CHECK_THROWS_AS(frame_signal(AudioBuffer(std::vector<double>(100), 44100.0), 0.010, 0.02), ContractError);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 3000, w = 1 + rng() % 200, s = 1 + rng() % w;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
    const auto frames = frame_signal(AudioBuffer(x, 1000.0), static_cast<double>(w) / 1000.0, static_cast<double>(s) / 1000.0);
    std::size_t expected = 0;
    for (std::size_t start = 0; start + w <= n; start += s) {
      REQUIRE(expected < frames.size());
      CHECK(frames[expected].start_index == start);
      CHECK(frames[expected].samples.size() == w);
      CHECK(frames[expected].samples.front() == static_cast<double>(start));
      ++expected;
    }
    CHECK(frames.size() == expected);
  }
}

TEST_CASE("magnitude_spectrum") {
  const double rate = 8000.0;
  SUBCASE("zero frame") {
    const auto s = magnitude_spectrum(Frame{0, std::vector<double>(64, 0.0), 0.008}, 64, rate);
    CHECK(s.magnitudes.size() == 33);
    for (double m : s.magnitudes) CHECK(m == 0.0);
  }
  SUBCASE("on-bin cosine peaks at its bin") {
    const std::size_t n = 256, k = 17;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
    const auto s = magnitude_spectrum(Frame{0, x, 0.032}, n, rate, WindowKind::kRectangular);
    CHECK(s.magnitudes[k] == doctest::Approx(n / 2.0).epsilon(1e-12));
    for (std::size_t b = 0; b < s.magnitudes.size(); ++b) {
      if (b != k) CHECK(s.magnitudes[b] < 1e-9);
    }
    CHECK(s.bin_hz == doctest::Approx(rate / n));
  }
  SUBCASE("impulse is flat") {
    std::vector<double> x(128, 0.0);
    x[0] = 1.0;
    const auto s = magnitude_spectrum(Frame{0, x, 0.016}, 128, rate, WindowKind::kRectangular);
    for (double m : s.magnitudes) CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("fft_size smaller than frame is a contract violation") {
    CHECK_THROWS_AS(magnitude_spectrum(Frame{0, std::vector<double>(100, 0.0), 0.01}, 64, rate), ContractError);
  }
  SUBCASE("Parseval on zero-padded windowed frames") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
      const std::size_t len = 50 + rng() % 400;
      const std::size_t fft = next_pow2(len) * (1 + rng() % 2);
      std::vector<double> x(len);
      for (double& v : x) v = g(rng);
      const auto w = window_coefficients(WindowKind::kHamming, len);
      double time_energy = 0.0;
      for (std::size_t i = 0; i < len; ++i) time_energy += (x[i] * w[i]) * (x[i] * w[i]);
      const auto s = magnitude_spectrum(Frame{0, x, 0.0}, fft, rate);
      double two_sided = s.magnitudes.front() * s.magnitudes.front() + s.magnitudes.back() * s.magnitudes.back();
      for (std::size_t b = 1; b + 1 < s.magnitudes.size(); ++b) two_sided += 2.0 * s.magnitudes[b] * s.magnitudes[b];
      CHECK(two_sided / static_cast<double>(fft) == doctest::Approx(time_energy).epsilon(1e-6));
    }
  }
}

TEST_CASE("FFT matches a direct DFT") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  const std::size_t n = 64;
  std::vector<std::complex<double>> x(n);
  for (auto& c : x) c = {g(rng), g(rng)};
  auto y = x;
  fft_inplace(y);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / n);
    CHECK(std::abs(acc - y[k]) < 1e-9);
  }
  fft_inplace(y, true);
  for (std::size_t t = 0; t < n; ++t) CHECK(std::abs(y[t] - x[t]) < 1e-12);
}
