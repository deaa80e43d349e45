#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"
#include "keytap/features.hpp"
#include "keytap/learners.hpp"
#include "keytap/recording.hpp"
#include "keytap/segmenter.hpp"

namespace keytap {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// ---- word recovery ---------------------------------------------------------

struct WordTrial {
  std::string actual_word;
  std::string guessed_word;                    // top-1 letter per position
  std::vector<std::vector<std::string>> top5;  // candidates per position
  double char_error = 0.0;                     // Hamming distance / length
  std::string corrected_word;
  double corrected_error = 0.0;
  bool segmentation_exact = true;  // false: clip boundaries used instead of detected onsets
};

// Letter -> single-keystroke clips held out from the model's training data.
using LetterBank = std::map<std::string, std::vector<Recording>>;

LetterBank make_letter_bank(const std::vector<Recording>& recs);

// One lowercase a-z word per line; blank lines are skipped.
std::vector<std::string> read_dictionary(const std::filesystem::path& path);

std::size_t levenshtein(const std::string& a, const std::string& b);

// Positions whose letter lies in that position's candidate set.
std::size_t top_set_hits(const std::string& word, const std::vector<std::vector<std::string>>& sets);

// Dictionary entry nearest in edit distance; ties go to the most top-set
// hits, then to the lexicographically first word.
std::string spell_correct(const std::string& guess, const std::vector<std::vector<std::string>>& sets,
                          const std::vector<std::string>& dictionary);

// Hamming distance over the actual word's positions (a missing or extra
// letter counts as wrong) divided by its length, capped at 1.
double char_error(const std::string& actual, const std::string& guess);

struct WordRecoveryConfig {
  SegmenterConfig segmenter;
  FeatureConfig features;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

struct WordRecoveryResult {
  std::vector<WordTrial> trials;
  std::vector<std::string> warnings;
  double mean_char_error = 0.0;
  double std_char_error = 0.0;
  double mean_corrected_error = 0.0;
  double std_corrected_error = 0.0;
};

WordRecoveryResult recover_words(const KeyClassifier& model, const LetterBank& bank,
                                 const std::vector<std::string>& dictionary, const WordRecoveryConfig& cfg);

nlohmann::json to_json(const WordTrial& t);
nlohmann::json to_json(const WordRecoveryResult& r);

// ---- password estimator ----------------------------------------------------

struct CrackPlan {
  unsigned alphabet = 26;
  unsigned length = 10;
  unsigned guesses = 5;  // candidates tried per character
  double accuracy = 1.0;  // per-character top-x accuracy
  std::vector<double> per_position;  // overrides accuracy when non-empty

  void validate() const;
  double position_accuracy(unsigned i) const;
};

struct CrackPhase {
  unsigned wrong = 0;  // positions outside the top-x set
  BigInt candidates;
  Rational mass;
  BigInt cumulative;
  Rational cumulative_mass;
};

struct CrackEstimate {
  CrackPlan plan;
  Rational target;
  std::vector<CrackPhase> phases;
  BigInt phase0;         // x^n
  BigInt space;          // L^n
  Rational guesses;      // candidates enumerated until the target probability
  unsigned final_phase = 0;

  double guesses_double() const { return guesses.convert_to<double>(); }
};

// Phases w = 0..n are enumerated in order; the target is reached by linear
// interpolation of the probability mass inside the final phase.
CrackEstimate expected_guesses(const CrackPlan& plan, double success_target);

// Exact value of a finite double.
Rational exact_rational(double v);

std::string to_decimal(const Rational& r, int digits = 3);

nlohmann::json to_json(const CrackEstimate& e);

struct SpeedupReport {
  CrackEstimate plan;
  CrackEstimate baseline;
  double speedup = 1.0;         // baseline guesses / plan guesses
  double phase0_speedup = 1.0;  // baseline guesses / x^n
  double baseline_bits = 0.0;   // log2(guesses / target)
  double plan_bits = 0.0;
  double entropy_reduction = 0.0;  // 1 - plan_bits / baseline_bits
  double space_bits = 0.0;         // log2(L^n)
  double top_space_bits = 0.0;     // log2(x^n)
};

SpeedupReport speedup_report(const CrackPlan& plan, const CrackPlan& baseline, double success_target);

nlohmann::json to_json(const SpeedupReport& r);

// Compares a printed figure against an exact value; relative error and a
// verdict, for published numbers that do not survive exact arithmetic.
struct FigureCheck {
  std::string expression;
  Rational exact;
  double printed = 0.0;
  double relative_error = 0.0;
  bool consistent = false;  // within the printed figure's rounding
};

FigureCheck check_printed_figure(const std::string& expression, const Rational& exact, double printed,
                                 int significant_digits);

nlohmann::json to_json(const FigureCheck& c);

}  // namespace keytap
