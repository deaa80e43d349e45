#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "keytap/applications.hpp"
#include "keytap/errors.hpp"
#include "keytap/scenarios.hpp"
#include "keytap/synth.hpp"

using namespace keytap;

namespace {

// Lists every password with its probability, orders by probability and walks
// the cumulative mass, interpolating within the group that crosses the target.
double brute_guesses(unsigned L, unsigned n, unsigned x, double p, double target) {
  const double in = p / x, out = L > x ? (1 - p) / (L - x) : 0.0;
  std::vector<double> probs;
  std::vector<unsigned> digit(n, 0);
  for (;;) {
    double pr = 1.0;
    for (unsigned d : digit) pr *= d < x ? in : out;
    probs.push_back(pr);
    unsigned i = 0;
    while (i < n && ++digit[i] == L) digit[i++] = 0;
    if (i == n) break;
  }
  std::sort(probs.begin(), probs.end(), std::greater<>());
  double mass = 0.0;
  std::size_t i = 0;
  while (i < probs.size()) {
    std::size_t j = i;
    while (j < probs.size() && std::abs(probs[j] - probs[i]) <= 1e-15) ++j;
    const double group = probs[i] * static_cast<double>(j - i);
    if (mass + group >= target - 1e-15) return static_cast<double>(i) + (target - mass) / probs[i];
    mass += group;
    i = j;
  }
  return static_cast<double>(probs.size());
}

std::size_t naive_levenshtein(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::string ra = a.substr(1), rb = b.substr(1);
  if (a[0] == b[0]) return naive_levenshtein(ra, rb);
  return 1 + std::min({naive_levenshtein(ra, b), naive_levenshtein(a, rb), naive_levenshtein(ra, rb)});
}

CrackPlan plan(unsigned L, unsigned n, unsigned x, double p) {
  CrackPlan c;
  c.alphabet = L;
  c.length = n;
  c.guesses = x;
  c.accuracy = p;
  return c;
}

}  // namespace

TEST_CASE("crack estimate: perfect top-5 accuracy") {
  const auto e = expected_guesses(plan(26, 10, 5, 1.0), 0.5);
  CHECK(e.phase0 == BigInt(9765625));
  CHECK(e.guesses == Rational(9765625, 2));
  CHECK(e.final_phase == 0);
  CHECK(to_decimal(e.guesses, 1) == "4882812.5");
}

TEST_CASE("crack estimate: exact phase structure") {
  const auto e = expected_guesses(plan(26, 10, 5, 0.917), 0.5);
  BigInt total = 0;
  Rational mass = 0;
  for (const auto& ph : e.phases) total += ph.candidates, mass += ph.mass;
  BigInt space = 1;
  for (int i = 0; i < 10; ++i) space *= 26;
  CHECK(e.space == space);
  CHECK(total == space);
  CHECK(mass == Rational(1));
  CHECK(e.phases[1].candidates == BigInt(10) * BigInt(9765625) / 5 * 21);
}

TEST_CASE("crack estimate matches an enumeration oracle") {
  struct Case {
    unsigned L, n, x;
    double p, target;
  };
  for (const auto& c : {Case{4, 3, 2, 0.7, 0.5}, Case{5, 4, 2, 0.9, 0.3}, Case{6, 3, 3, 0.6, 0.8},
                        Case{3, 5, 1, 0.5, 0.5}, Case{7, 4, 3, 1.0, 0.25}}) {
    CAPTURE(c.L);
    CAPTURE(c.p);
    const auto e = expected_guesses(plan(c.L, c.n, c.x, c.p), c.target);
    CHECK(e.guesses_double() == doctest::Approx(brute_guesses(c.L, c.n, c.x, c.p, c.target)).epsilon(1e-9));
  }
}

TEST_CASE("crack estimate properties") {
  SUBCASE("brute force needs target * L^n guesses") {
    const auto e = expected_guesses(plan(26, 6, 26, 1.0), 0.5);
    BigInt space = 1;
    for (int i = 0; i < 6; ++i) space *= 26;
    CHECK(e.guesses == Rational(space) / 2);
  }
  SUBCASE("monotone in accuracy and target") {
    double prev = 1e300;
    for (double p : {0.3, 0.5, 0.7, 0.9, 1.0}) {
      const double g = expected_guesses(plan(26, 8, 5, p), 0.5).guesses_double();
      CHECK(g < prev);
      prev = g;
    }
    prev = 0;
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double g = expected_guesses(plan(26, 8, 5, 0.8), t).guesses_double();
      CHECK(g > prev);
      prev = g;
    }
  }
  SUBCASE("per-position accuracies") {
    auto c = plan(10, 3, 2, 0.0);
    c.per_position = {0.9, 0.9, 0.9};
    CHECK(expected_guesses(c, 0.5).guesses == expected_guesses(plan(10, 3, 2, 0.9), 0.5).guesses);
  }
  SUBCASE("speedup against itself is one") {
    const auto r = speedup_report(plan(26, 10, 5, 0.9), plan(26, 10, 5, 0.9), 0.5);
    CHECK(r.speedup == doctest::Approx(1.0));
    CHECK(r.entropy_reduction == doctest::Approx(0.0));
  }
  SUBCASE("speedup of the top-5 plan") {
    const auto r = speedup_report(plan(26, 10, 5, 0.917), plan(26, 10, 26, 1.0), 0.5);
    CHECK(r.speedup == doctest::Approx(738876).epsilon(1e-5));
    CHECK(r.top_space_bits / r.space_bits == doctest::Approx(std::log(5.0) / std::log(26.0)));
  }
  SUBCASE("contract errors") {
    CHECK_THROWS_AS(expected_guesses(plan(26, 10, 0, 1.0), 0.5), ContractError);
    CHECK_THROWS_AS(expected_guesses(plan(26, 10, 27, 1.0), 0.5), ContractError);
    CHECK_THROWS_AS(expected_guesses(plan(26, 10, 26, 0.9), 0.5), ContractError);
    CHECK_THROWS_AS(expected_guesses(plan(26, 10, 5, 1.2), 0.5), ContractError);
    CHECK_THROWS_AS(expected_guesses(plan(26, 10, 5, 0.9), 1.0), ContractError);
  }
}

TEST_CASE("printed figure check") {
  BigInt space = 1;
  for (int i = 0; i < 10; ++i) space *= 26;
  const Rational half = Rational(space) / 2;
  CHECK_FALSE(check_printed_figure("26^10 / 2", half, 8.39e13, 3).consistent);
  CHECK(check_printed_figure("26^10 / 2", half, 7.06e13, 3).consistent);
  CHECK(exact_rational(0.5) == Rational(1, 2));
  CHECK(exact_rational(0.917).convert_to<double>() == 0.917);
}

TEST_CASE("word helpers") {
  SUBCASE("levenshtein against the recursive definition") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> len(0, 6), ch(0, 3);
    for (int t = 0; t < 300; ++t) {
      std::string a, b;
      for (int i = len(rng); i > 0; --i) a += static_cast<char>('a' + ch(rng));
      for (int i = len(rng); i > 0; --i) b += static_cast<char>('a' + ch(rng));
      CHECK(levenshtein(a, b) == naive_levenshtein(a, b));
    }
  }
  SUBCASE("char_error") {
    CHECK(char_error("hello", "hello") == 0.0);
    CHECK(char_error("hello", "hallo") == doctest::Approx(0.2));
    CHECK(char_error("hello", "hell") == doctest::Approx(0.2));
    CHECK(char_error("hi", "hiya") == 1.0);
    CHECK(char_error("hello", "") == 1.0);
  }
  SUBCASE("spell_correct tie rules") {
    const std::vector<std::vector<std::string>> sets{{"c", "b"}, {"a"}, {"t"}};
    CHECK(spell_correct("cat", sets, {"bat", "cat"}) == "cat");
    // "bat" and "hat" are both one edit away; only "bat" agrees with the top sets.
    CHECK(spell_correct("zat", sets, {"hat", "bat"}) == "bat");
    CHECK(spell_correct("zzz", {{"q"}, {"q"}, {"q"}}, {"dog", "cow"}) == "cow");
    CHECK(top_set_hits("bat", sets) == 3);
  }
  SUBCASE("dictionary parsing") {
    const auto path = std::filesystem::temp_directory_path() / "keytap_test_dict.txt";
    std::ofstream(path) << "apple\n\nbanana\n";
    CHECK(read_dictionary(path) == std::vector<std::string>{"apple", "banana"});
    std::ofstream(path) << "apple\nBan4na\n";
    CHECK_THROWS_AS(read_dictionary(path), ParseError);
    std::ofstream(path) << "\n";
    CHECK_THROWS_AS(read_dictionary(path), DegenerateInputError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("word recovery") {
  CorpusSpec spec;
  spec.keys = "abcdefgh";
  spec.samples_per_key = 8;
  const auto clips = generate_clips(spec);
  std::vector<Recording> train, bank;
  for (std::size_t i = 0; i < clips.size(); ++i) (i / spec.keys.size() < 6 ? train : bank).push_back(clips[i]);
  KeyModelConfig key;
  key.rfe = false;
  const auto model = train_key_model(featurize(train, PipelineConfig{}), key);

  WordRecoveryConfig cfg;
  cfg.trials = 20;
  cfg.seed = 9;
  const std::vector<std::string> dict{"bad", "cafe", "face", "head", "beef", "hag"};
  const auto r = recover_words(model, make_letter_bank(bank), dict, cfg);
  CHECK(r.trials.size() == 20);
  CHECK(r.warnings.empty());
  CHECK(r.mean_char_error <= 0.2);
  CHECK(r.mean_corrected_error <= r.mean_char_error + 1e-12);
  for (const auto& t : r.trials) {
    CHECK(t.top5.size() == t.actual_word.size());
    CHECK(std::find(dict.begin(), dict.end(), t.corrected_word) != dict.end());
  }
  const auto again = recover_words(model, make_letter_bank(bank), dict, cfg);
  CHECK(again.mean_char_error == r.mean_char_error);

  SUBCASE("a word needing an absent letter is skipped with a warning") {
    const auto w = recover_words(model, make_letter_bank(bank), {"zebra", "bad"}, cfg);
    CHECK_FALSE(w.warnings.empty());
    for (const auto& t : w.trials) CHECK(t.actual_word == "bad");
  }
}
