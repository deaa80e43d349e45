#include "keytap/applications.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "keytap/errors.hpp"
#include "keytap/io.hpp"
#include "keytap/random.hpp"
#include "keytap/scenarios.hpp"

namespace keytap {

LetterBank make_letter_bank(const std::vector<Recording>& recs) {
  LetterBank bank;
  for (const auto& r : recs) bank[r.label].push_back(r);
  return bank;
}

std::vector<std::string> read_dictionary(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] < 'a' || line[i] > 'z') {
        throw ParseError("dictionary " + path.string() + ": expected lowercase a-z words", pos + i);
      }
    }
    if (!line.empty()) words.push_back(std::move(line));
    pos = end + 1;
  }
  if (words.empty()) throw DegenerateInputError("dictionary " + path.string() + " holds no words");
  return words;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t top_set_hits(const std::string& word, const std::vector<std::vector<std::string>>& sets) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(word.size(), sets.size()); ++i) {
    const std::string c(1, word[i]);
    if (std::find(sets[i].begin(), sets[i].end(), c) != sets[i].end()) ++hits;
  }
  return hits;
}

std::string spell_correct(const std::string& guess, const std::vector<std::vector<std::string>>& sets,
                          const std::vector<std::string>& dictionary) {
  if (dictionary.empty()) throw ContractError("spell_correct: empty dictionary");
  const std::string* best = nullptr;
  std::size_t best_dist = 0, best_hits = 0;
  for (const auto& w : dictionary) {
    const auto d = levenshtein(guess, w);
    const auto h = top_set_hits(w, sets);
    if (!best || d < best_dist || (d == best_dist && (h > best_hits || (h == best_hits && w < *best)))) {
      best = &w;
      best_dist = d;
      best_hits = h;
    }
  }
  return *best;
}

double char_error(const std::string& actual, const std::string& guess) {
  if (actual.empty()) throw ContractError("char_error: empty word");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (i >= guess.size() || guess[i] != actual[i]) ++wrong;
  }
  if (guess.size() > actual.size()) wrong += guess.size() - actual.size();
  return std::min(1.0, static_cast<double>(wrong) / static_cast<double>(actual.size()));
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

}  // namespace

WordRecoveryResult recover_words(const KeyClassifier& model, const LetterBank& bank,
                                 const std::vector<std::string>& dictionary, const WordRecoveryConfig& cfg) {
  if (dictionary.empty()) throw ContractError("recover_words: empty dictionary");
  if (bank.empty()) throw ContractError("recover_words: empty letter bank");
  cfg.segmenter.validate();

  WordRecoveryResult result;
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::string& word = dictionary[std::uniform_int_distribution<std::size_t>(0, dictionary.size() - 1)(rng)];
    std::vector<const Recording*> clips;
    std::string missing;
    for (char c : word) {
      auto it = bank.find(std::string(1, c));
      if (it == bank.end() || it->second.empty()) {
        missing = std::string(1, c);
        break;
      }
      const auto& pool = it->second;
      clips.push_back(&pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]);
    }
    if (!missing.empty()) {
      result.warnings.push_back("trial " + std::to_string(t) + ": word '" + word + "' needs letter '" + missing +
                                "' absent from the bank; skipped");
      continue;
    }

    const double rate = clips.front()->audio.sample_rate();
    std::vector<double> joined;
    std::vector<std::size_t> starts;
    for (const auto* c : clips) {
      if (c->audio.sample_rate() != rate) throw ContractError("recover_words: letter clips differ in sample rate");
      starts.push_back(joined.size());
      joined.insert(joined.end(), c->audio.samples().begin(), c->audio.samples().end());
    }
    const AudioBuffer audio(std::move(joined), rate);

    WordTrial trial;
    trial.actual_word = word;
    const auto cal = calibrate_threshold(audio, word.size(), cfg.segmenter);
    std::vector<KeystrokeSegment> segs;
    if (cal.exact) {
      segs = detect_keystrokes(audio, cal.config);
    } else {
      trial.segmentation_exact = false;
      result.warnings.push_back("trial " + std::to_string(t) + ": detected " + std::to_string(cal.achieved_count) +
                                " keystrokes for '" + word + "'; using clip boundaries");
      for (std::size_t i = 0; i < clips.size(); ++i) {
        auto s = segment_clip(clips[i]->audio, cfg.segmenter);
        s.onset_s += static_cast<double>(starts[i]) / rate;
        segs.push_back(std::move(s));
      }
    }

    for (const auto& s : segs) {
      const auto ranked = predict_ranked(model, extract_features(s, cfg.features));
      trial.guessed_word += ranked.top();
      std::vector<std::string> set;
      for (std::size_t k = 0; k < std::min<std::size_t>(5, ranked.ranking.size()); ++k) {
        set.push_back(ranked.ranking[k].first);
      }
      trial.top5.push_back(std::move(set));
    }
    trial.char_error = char_error(trial.actual_word, trial.guessed_word);
    trial.corrected_word = spell_correct(trial.guessed_word, trial.top5, dictionary);
    trial.corrected_error = char_error(trial.actual_word, trial.corrected_word);
    result.trials.push_back(std::move(trial));
  }

  std::vector<double> raw, corrected;
  for (const auto& t : result.trials) {
    raw.push_back(t.char_error);
    corrected.push_back(t.corrected_error);
  }
  mean_std(raw, result.mean_char_error, result.std_char_error);
  mean_std(corrected, result.mean_corrected_error, result.std_corrected_error);
  return result;
}

nlohmann::json to_json(const WordTrial& t) {
  return {{"actual_word", t.actual_word},   {"guessed_word", t.guessed_word},
          {"top5", t.top5},                 {"char_error", t.char_error},
          {"corrected_word", t.corrected_word}, {"corrected_error", t.corrected_error},
          {"segmentation_exact", t.segmentation_exact}};
}

nlohmann::json to_json(const WordRecoveryResult& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) trials.push_back(to_json(t));
  return {{"trials", trials},
          {"warnings", r.warnings},
          {"mean_char_error", r.mean_char_error},
          {"std_char_error", r.std_char_error},
          {"mean_corrected_error", r.mean_corrected_error},
          {"std_corrected_error", r.std_corrected_error}};
}

// ---- password estimator ----------------------------------------------------

void CrackPlan::validate() const {
  if (alphabet == 0) throw ContractError("crack plan: alphabet must be non-empty");
  if (length == 0) throw ContractError("crack plan: password length must be at least 1");
  if (guesses == 0 || guesses > alphabet) throw ContractError("crack plan: guesses per character must be in [1, L]");
  auto check = [&](double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("crack plan: accuracy must be in [0, 1]");
    if (guesses == alphabet && p != 1.0) throw ContractError("crack plan: x = L implies accuracy 1");
  };
  if (per_position.empty()) {
    check(accuracy);
  } else {
    if (per_position.size() != length) throw ContractError("crack plan: one accuracy per position required");
    for (double p : per_position) check(p);
  }
}

double CrackPlan::position_accuracy(unsigned i) const { return per_position.empty() ? accuracy : per_position.at(i); }

Rational exact_rational(double v) {
  if (!std::isfinite(v)) throw ContractError("exact_rational: value must be finite");
  int exp = 0;
  const double mant = std::frexp(v, &exp);
  // mant * 2^53 is an integer for every finite double
  const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
  exp -= 53;
  BigInt num = scaled;
  BigInt den = 1;
  if (exp >= 0) {
    num <<= exp;
  } else {
    den <<= -exp;
  }
  return Rational(num, den);
}

std::string to_decimal(const Rational& r, int digits) {
  const BigInt num = boost::multiprecision::numerator(r);
  const BigInt den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  const bool negative = num < 0;
  BigInt scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  BigInt scaled = (abs(num) * scale * 2 + den) / (den * 2);
  std::string whole = BigInt(scaled / scale).str();
  std::string frac = BigInt(scaled % scale).str();
  if (digits > 0) frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  return (negative ? "-" : "") + whole + (digits > 0 ? "." + frac : "");
}

CrackEstimate expected_guesses(const CrackPlan& plan, double success_target) {
  plan.validate();
  if (!(success_target > 0.0 && success_target < 1.0)) {
    throw ContractError("expected_guesses: success target must be in (0, 1)");
  }
  const unsigned n = plan.length;
  CrackEstimate e;
  e.plan = plan;
  e.target = exact_rational(success_target);
  e.space = pow(BigInt(plan.alphabet), n);
  e.phase0 = pow(BigInt(plan.guesses), n);

  // mass[w]: probability that exactly w positions miss the top-x set
  std::vector<Rational> mass(n + 1, Rational(0));
  mass[0] = 1;
  for (unsigned i = 0; i < n; ++i) {
    const Rational p = exact_rational(plan.position_accuracy(i));
    for (unsigned w = i + 1; w > 0; --w) mass[w] = mass[w] * p + mass[w - 1] * (Rational(1) - p);
    mass[0] *= p;
  }

  BigInt binom = 1, cum = 0;
  Rational cum_mass = 0;
  for (unsigned w = 0; w <= n; ++w) {
    if (w > 0) binom = binom * (n - w + 1) / w;
    CrackPhase ph;
    ph.wrong = w;
    ph.candidates = binom * pow(BigInt(plan.guesses), n - w) * pow(BigInt(plan.alphabet - plan.guesses), w);
    ph.mass = mass[w];
    cum += ph.candidates;
    cum_mass += ph.mass;
    ph.cumulative = cum;
    ph.cumulative_mass = cum_mass;
    e.phases.push_back(ph);
  }

  BigInt before = 0;
  Rational before_mass = 0;
  bool found = false;
  for (const auto& ph : e.phases) {
    if (ph.mass > 0 && ph.cumulative_mass >= e.target) {
      e.guesses = Rational(before) + (e.target - before_mass) / ph.mass * Rational(ph.candidates);
      e.final_phase = ph.wrong;
      found = true;
      break;
    }
    before = ph.cumulative;
    before_mass = ph.cumulative_mass;
  }
  if (!found) throw DegenerateInputError("expected_guesses: target probability unreachable");
  return e;
}

nlohmann::json to_json(const CrackEstimate& e) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : e.phases) {
    phases.push_back({{"wrong", p.wrong},
                      {"candidates", p.candidates.str()},
                      {"mass", p.mass.convert_to<double>()},
                      {"cumulative", p.cumulative.str()},
                      {"cumulative_mass", p.cumulative_mass.convert_to<double>()}});
  }
  nlohmann::json plan = {{"alphabet", e.plan.alphabet},
                         {"length", e.plan.length},
                         {"guesses_per_char", e.plan.guesses},
                         {"accuracy", e.plan.accuracy}};
  if (!e.plan.per_position.empty()) plan["per_position"] = e.plan.per_position;
  return {{"plan", plan},
          {"target", e.target.convert_to<double>()},
          {"phase0_candidates", e.phase0.str()},
          {"search_space", e.space.str()},
          {"expected_guesses", to_decimal(e.guesses)},
          {"expected_guesses_float", e.guesses_double()},
          {"final_phase", e.final_phase},
          {"phases", phases},
          {"within_phase_order", "uniform (linear interpolation of mass inside the final phase)"}};
}

SpeedupReport speedup_report(const CrackPlan& plan, const CrackPlan& baseline, double success_target) {
  SpeedupReport r;
  r.plan = expected_guesses(plan, success_target);
  r.baseline = expected_guesses(baseline, success_target);
  r.speedup = Rational(r.baseline.guesses / r.plan.guesses).convert_to<double>();
  r.phase0_speedup = Rational(r.baseline.guesses / Rational(r.plan.phase0)).convert_to<double>();
  auto bits = [&](const CrackEstimate& e) {
    return std::log2(e.guesses_double()) - std::log2(e.target.convert_to<double>());
  };
  r.baseline_bits = bits(r.baseline);
  r.plan_bits = bits(r.plan);
  r.entropy_reduction = r.baseline_bits > 0.0 ? 1.0 - r.plan_bits / r.baseline_bits : 0.0;
  r.space_bits = plan.length * std::log2(static_cast<double>(plan.alphabet));
  r.top_space_bits = plan.length * std::log2(static_cast<double>(plan.guesses));
  return r;
}

nlohmann::json to_json(const SpeedupReport& r) {
  return {{"plan", to_json(r.plan)},
          {"baseline", to_json(r.baseline)},
          {"speedup", r.speedup},
          {"phase0_speedup", r.phase0_speedup},
          {"baseline_bits", r.baseline_bits},
          {"plan_bits", r.plan_bits},
          {"entropy_reduction", r.entropy_reduction},
          {"space_bits", r.space_bits},
          {"top_space_bits", r.top_space_bits},
          {"top_space_reduction", r.space_bits > 0 ? 1.0 - r.top_space_bits / r.space_bits : 0.0}};
}

FigureCheck check_printed_figure(const std::string& expression, const Rational& exact, double printed,
                                 int significant_digits) {
  if (significant_digits < 1) throw ContractError("check_printed_figure: need at least one significant digit");
  FigureCheck c;
  c.expression = expression;
  c.exact = exact;
  c.printed = printed;
  const double x = exact.convert_to<double>();
  c.relative_error = x != 0.0 ? (printed - x) / x : std::numeric_limits<double>::infinity();
  const double ulp = std::pow(10.0, std::floor(std::log10(std::abs(x))) - significant_digits + 1);
  c.consistent = std::abs(printed - x) <= 0.5 * ulp * (1.0 + 1e-12);
  return c;
}

nlohmann::json to_json(const FigureCheck& c) {
  return {{"expression", c.expression},
          {"exact", to_decimal(c.exact)},
          {"printed", c.printed},
          {"relative_error", c.relative_error},
          {"consistent", c.consistent}};
}

}  // namespace keytap
