#include <random>

#include "doctest.h"
#include "keytap/countermeasure.hpp"
#include "keytap/errors.hpp"

using namespace keytap;

namespace {

constexpr double kRate = 44100.0;

AudioBuffer noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return AudioBuffer(std::move(x), kRate);
}

bool same(const AudioBuffer& a, const AudioBuffer& b) {
  return a.size() == b.size() && std::equal(a.samples().begin(), a.samples().end(), b.samples().begin());
}

}  // namespace

TEST_CASE("draw_eq_bands") {
  EqConfig cfg;
  cfg.seed = 42;
  const auto bands = draw_eq_bands(cfg);
  REQUIRE(bands.size() == 100);
  for (const auto& b : bands) {
    CHECK(b.center_hz >= 100.0);
    CHECK(b.center_hz <= 3000.0);
    CHECK(b.gain_db >= -5.0);
    CHECK(b.gain_db <= 5.0);
  }
  SUBCASE("deterministic per seed") {
    const auto again = draw_eq_bands(cfg);
    for (std::size_t i = 0; i < bands.size(); ++i) CHECK(again[i].center_hz == bands[i].center_hz);
    cfg.seed = 43;
    CHECK(draw_eq_bands(cfg)[0].center_hz != bands[0].center_hz);
  }
  SUBCASE("fixed gain") {
    cfg.gain_min_db = cfg.gain_max_db = 2.0;
    for (const auto& b : draw_eq_bands(cfg)) CHECK(b.gain_db == 2.0);
  }
}

TEST_CASE("eq validation") {
  EqConfig cfg;
  CHECK_NOTHROW(cfg.validate(kRate));
  cfg.n_bands = 0;
  CHECK_THROWS_AS(cfg.validate(kRate), ContractError);
  cfg = {};
  cfg.center_max_hz = 30000;
  CHECK_THROWS_AS(cfg.validate(kRate), ContractError);
  cfg = {};
  cfg.gain_min_db = 6;
  CHECK_THROWS_AS(cfg.validate(kRate), ContractError);
  cfg = {};
  cfg.q = 0;
  CHECK_THROWS_AS(cfg.validate(kRate), ContractError);
}

TEST_CASE("seed modes") {
  CHECK(eq_seed_mode_from_string("per-keystroke") == EqSeedMode::kPerKeystroke);
  CHECK(eq_seed_mode_from_string(to_string(EqSeedMode::kPerRecording)) == EqSeedMode::kPerRecording);
  CHECK_THROWS_AS(eq_seed_mode_from_string("sometimes"), ContractError);
  CHECK(keystroke_seed(1, 0) != keystroke_seed(1, 1));
  CHECK(keystroke_seed(1, 5) == keystroke_seed(1, 5));
}

TEST_CASE("randomize_eq_batch") {
  const auto clip = noise(4410, 9);
  std::vector<KeystrokeSegment> segs(3);
  for (auto& s : segs) s.waveform = clip;
  EqConfig cfg;
  cfg.seed = 5;

  SUBCASE("per-keystroke draws differ between keystrokes") {
    const auto out = randomize_eq_batch(segs, cfg, EqSeedMode::kPerKeystroke);
    REQUIRE(out.size() == 3);
    CHECK_FALSE(same(out[0].waveform, out[1].waveform));
    CHECK_FALSE(same(out[1].waveform, out[2].waveform));
    for (const auto& s : out) CHECK(s.waveform.size() == clip.size());
  }
  SUBCASE("per-recording uses one draw") {
    const auto out = randomize_eq_batch(segs, cfg, EqSeedMode::kPerRecording);
    CHECK(same(out[0].waveform, out[1].waveform));
    CHECK(same(out[1].waveform, out[2].waveform));
    CHECK_FALSE(same(out[0].waveform, clip));
  }
  SUBCASE("deterministic") {
    const auto a = randomize_eq_batch(segs, cfg);
    const auto b = randomize_eq_batch(segs, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(same(a[i].waveform, b[i].waveform));
  }
  SUBCASE("zero gain leaves audio intact") {
    cfg.gain_min_db = cfg.gain_max_db = 0.0;
    const auto out = randomize_eq_batch(segs, cfg);
    for (std::size_t i = 0; i < clip.size(); ++i)
      CHECK(out[0].waveform.samples()[i] == doctest::Approx(clip.samples()[i]).epsilon(1e-6));
  }
}

TEST_CASE("defend_recording") {
  std::vector<double> x(44100, 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.3);
  for (double at : {0.1, 0.4, 0.7})
    for (std::size_t i = static_cast<std::size_t>(at * kRate); i < static_cast<std::size_t>((at + 0.03) * kRate); ++i)
      x[i] = g(rng);
  const AudioBuffer rec(std::move(x), kRate);
  SegmenterConfig seg;
  seg.threshold = 5.0;
  EqConfig eq;
  eq.seed = 3;
  for (auto mode : {EqSeedMode::kPerKeystroke, EqSeedMode::kPerRecording}) {
    const auto a = defend_recording(rec, eq, seg, mode);
    CHECK(a.size() == rec.size());
    CHECK(same(a, defend_recording(rec, eq, seg, mode)));
    CHECK_FALSE(same(a, rec));
  }
}
