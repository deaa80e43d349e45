#include <map>
#include <numeric>

#include "doctest.h"
#include "keytap/errors.hpp"
#include "keytap/scenarios.hpp"
#include "keytap/synth.hpp"

using namespace keytap;

namespace {

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.keys = "abcdef";
  spec.samples_per_key = 6;
  return spec;
}

KeyModelConfig fast_model() {
  KeyModelConfig cfg;
  cfg.rfe = false;
  return cfg;
}

}  // namespace

TEST_CASE("frequency schedule") {
  const auto s = frequency_schedule();
  REQUIRE(s.size() == 26);
  CHECK(std::accumulate(s.begin(), s.end(), std::size_t{0}) == 105);
  CHECK(s.front() == 10);
  CHECK(s.back() == 1);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= s[i - 1]);
  CHECK(english_letter_ranking().size() == 26);
  CHECK(english_letter_ranking().front() == 'e');
}

TEST_CASE("frequency subset") {
  CorpusSpec spec;
  spec.samples_per_key = 10;
  const auto data = featurize(generate_clips(spec), PipelineConfig{});
  const auto sub = make_frequency_subset(data, 3);
  CHECK(sub.size() == 105);
  std::map<std::string, std::size_t> counts;
  for (const auto& l : sub.labels) counts[l]++;
  const auto sched = frequency_schedule();
  for (std::size_t i = 0; i < 26; ++i) CHECK(counts[std::string(1, english_letter_ranking()[i])] == sched[i]);
  CHECK(make_frequency_subset(data, 3).labels == sub.labels);

  const auto few = featurize(generate_clips(small_spec()), PipelineConfig{});
  CHECK_THROWS(make_frequency_subset(few, 3));
}

TEST_CASE("summarize") {
  const auto r = summarize("x", 4, {{0.5, 0.75, 1.0, 1.0}, {0.25, 0.75, 1.0, 1.0}});
  CHECK(r.top(1) == doctest::Approx(0.375));
  CHECK(r.top(4) == 1.0);
  CHECK(r.stddev[1] == 0.0);
  CHECK(r.baseline == std::vector<double>{0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("check_disjoint") {
  LabeledDataset a, b;
  FeatureVector v{{1.0, 2.0}};
  SampleMeta m;
  m.source = "s1";
  a.add(v, "a", m);
  b.add(v, "a", m);
  CHECK_THROWS_AS(check_disjoint(a, b), ContractError);
  LabeledDataset c;
  m.source = "s2";
  c.add(v, "a", m);
  CHECK_NOTHROW(check_disjoint(a, c));
}

TEST_CASE("segment_clip finds the press") {
  for (const auto& r : generate_clips(small_spec())) {
    const auto seg = segment_clip(r.audio, SegmenterConfig{});
    CHECK(std::abs(seg.onset_s - r.onsets_s[0]) <= 0.010);
  }
}

TEST_CASE("complete profiling on a separable corpus") {
  const auto data = featurize(generate_clips(small_spec()), PipelineConfig{});
  const auto r = run_complete_profiling(data, fast_model(), 3, 1);
  CHECK(r.n_classes == 6);
  CHECK(r.runs.size() == 3);
  CHECK(r.top(6) == doctest::Approx(1.0));
  CHECK(r.top(1) > 0.9);
  for (std::size_t n = 1; n < r.mean.size(); ++n) CHECK(r.mean[n] >= r.mean[n - 1]);
  const auto again = run_complete_profiling(data, fast_model(), 3, 1);
  CHECK(again.mean == r.mean);
}

TEST_CASE("sweep lengths include 3 ms") {
  const auto l = default_sweep_lengths();
  CHECK(l.front() == doctest::Approx(0.003));
  CHECK(l.back() == doctest::Approx(0.100));
}

TEST_CASE("identity channel matches the plain run") {
  const auto recs = generate_clips(small_spec());
  const auto pts = run_channel_sweep(recs, PipelineConfig{}, fast_model(), {}, 3, 2);
  std::map<std::string, std::vector<double>> by;
  for (const auto& p : pts) by[p.setting] = p.report.mean;
  REQUIRE(by.count("plain"));
  REQUIRE(by.count("identity"));
  CHECK(by["plain"] == by["identity"]);
}

TEST_CASE("device classification") {
  CorpusSpec spec = small_spec();
  spec.models = 3;
  spec.users = 2;
  const auto data = featurize(generate_clips(spec), PipelineConfig{});
  LabeledDataset db, victim;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool v = data.meta[i].device_model == model_name(1) && data.meta[i].user == user_name(0);
    (v ? victim : db).add(data.vectors[i], data.labels[i], data.meta[i]);
  }
  SUBCASE("known model is identified") {
    LabeledDataset others;
    for (std::size_t i = 0; i < db.size(); ++i)
      if (db.meta[i].user != user_name(0)) others.add(db.vectors[i], db.labels[i], db.meta[i]);
    const auto d = classify_device(train_device_db(others, 10), victim.vectors);
    CHECK(d.model == model_name(1));
    CHECK(d.known);
    CHECK(d.samples == victim.size());
  }
  SUBCASE("absent model is mostly flagged unknown") {
    LabeledDataset without;
    for (std::size_t i = 0; i < db.size(); ++i)
      if (db.meta[i].device_model != model_name(1)) without.add(db.vectors[i], db.labels[i], db.meta[i]);
    const auto d = classify_device(train_device_db(without, 10), victim.vectors);
    CHECK(d.model != model_name(1));
  }
}
