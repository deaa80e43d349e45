#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "keytap/errors.hpp"
#include "keytap/model_io.hpp"
#include "keytap/random.hpp"
#include "keytap/scenarios.hpp"

namespace keytap {

nlohmann::json to_json(const SegmenterConfig& c) {
  return {{"energy_window_s", c.energy_window_s},
          {"threshold", c.threshold},
          {"segment_length_s", c.segment_length_s},
          {"refractory_s", c.refractory_s},
          {"remove_dc", c.remove_dc}};
}

SegmenterConfig segmenter_config_from_json(const nlohmann::json& j) {
  SegmenterConfig c;
  try {
    c.energy_window_s = j.value("energy_window_s", c.energy_window_s);
    c.threshold = j.value("threshold", c.threshold);
    c.segment_length_s = j.value("segment_length_s", c.segment_length_s);
    c.refractory_s = j.value("refractory_s", c.refractory_s);
    c.remove_dc = j.value("remove_dc", c.remove_dc);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("segmenter config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const EqConfig& c) {
  return {{"n_bands", c.n_bands},         {"center_min_hz", c.center_min_hz}, {"center_max_hz", c.center_max_hz},
          {"q", c.q},                     {"gain_min_db", c.gain_min_db},     {"gain_max_db", c.gain_max_db},
          {"seed", c.seed}};
}

EqConfig eq_config_from_json(const nlohmann::json& j) {
  EqConfig c;
  try {
    c.n_bands = j.value("n_bands", c.n_bands);
    c.center_min_hz = j.value("center_min_hz", c.center_min_hz);
    c.center_max_hz = j.value("center_max_hz", c.center_max_hz);
    c.q = j.value("q", c.q);
    c.gain_min_db = j.value("gain_min_db", c.gain_min_db);
    c.gain_max_db = j.value("gain_max_db", c.gain_max_db);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("eq config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const ChannelConfig& c) {
  nlohmann::json j = {{"target_kbps", c.target_kbps}, {"packet_ms", c.packet_ms}, {"loss_rate", c.loss_rate},
                      {"filter_order", c.filter_order}, {"seed", c.seed}};
  j["cutoff_hz"] = std::isfinite(c.cutoff_hz) ? nlohmann::json(c.cutoff_hz) : nlohmann::json("none");
  return j;
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  return {{"segmenter", to_json(cfg.segmenter)}, {"features", to_json(cfg.features)}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  try {
    if (j.contains("segmenter")) cfg.segmenter = segmenter_config_from_json(j.at("segmenter"));
    if (j.contains("features")) cfg.features = feature_config_from_json(j.at("features"));
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

KeystrokeSegment segment_clip(const AudioBuffer& audio, const SegmenterConfig& cfg) {
  const auto cal = calibrate_threshold(audio, 1, cfg);
  auto segs = detect_keystrokes(audio, cal.config);
  if (!segs.empty()) return segs.front();
  KeystrokeSegment s;
  s.onset_s = 0.0;
  s.waveform = audio.slice(0, samples_for(cfg.segment_length_s, audio.sample_rate()));
  s.nominal_length_s = cfg.segment_length_s;
  return s;
}

std::vector<KeystrokeSegment> segment_clips(const std::vector<Recording>& recs, const SegmenterConfig& cfg,
                                            const AudioTransform& transform) {
  std::vector<KeystrokeSegment> out;
  out.reserve(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    out.push_back(transform ? segment_clip(transform(recs[i], i), cfg) : segment_clip(recs[i].audio, cfg));
  }
  return out;
}

LabeledDataset featurize(const std::vector<Recording>& recs, const std::vector<KeystrokeSegment>& segs,
                         const FeatureConfig& cfg) {
  if (recs.size() != segs.size()) throw ContractError("featurize: one segment per recording required");
  LabeledDataset d;
  for (std::size_t i = 0; i < recs.size(); ++i) d.add(extract_features(segs[i], cfg), recs[i].label, recs[i].meta);
  return d;
}

LabeledDataset featurize(const std::vector<Recording>& recs, const PipelineConfig& cfg) {
  return featurize(recs, segment_clips(recs, cfg.segmenter), cfg.features);
}

nlohmann::json to_json(const KeyModelConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"params", cfg.params},
          {"rfe", cfg.rfe},
          {"rfe_keep_fraction", cfg.rfe_keep_fraction},
          {"rfe_step", cfg.rfe_step}};
}

KeyModelConfig key_model_config_from_json(const nlohmann::json& j) {
  KeyModelConfig cfg;
  try {
    if (j.contains("kind")) cfg.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("params")) cfg.params = j.at("params").get<HyperParams>();
    cfg.rfe = j.value("rfe", cfg.rfe);
    cfg.rfe_keep_fraction = j.value("rfe_keep_fraction", cfg.rfe_keep_fraction);
    cfg.rfe_step = j.value("rfe_step", cfg.rfe_step);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("key model config: ") + e.what());
  }
  if (!(cfg.rfe_keep_fraction > 0 && cfg.rfe_keep_fraction <= 1)) throw ContractError("rfe_keep_fraction must lie in (0, 1]");
  if (!(cfg.rfe_step > 0)) throw ContractError("rfe_step must be positive");
  return cfg;
}

KeyClassifier train_key_model(const LabeledDataset& train, const KeyModelConfig& cfg) {
  std::vector<std::size_t> mask;
  if (cfg.rfe) {
    RfeConfig rfe;
    rfe.target_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.rfe_keep_fraction * static_cast<double>(train.dimension()))));
    rfe.step = cfg.rfe_step;
    if (auto it = cfg.params.find("l2"); it != cfg.params.end()) rfe.lr.l2 = it->second;
    if (auto it = cfg.params.find("max_iter"); it != cfg.params.end()) rfe.lr.max_iter = static_cast<int>(it->second);
    if (auto it = cfg.params.find("tol"); it != cfg.params.end()) rfe.lr.tol = it->second;
    if (rfe.target_count < train.dimension()) mask = rfe_select(train, rfe);
  }
  return train_classifier(cfg.kind, train, cfg.params, mask);
}

void check_disjoint(const LabeledDataset& train, const LabeledDataset& test) {
  std::set<std::string> seen;
  for (const auto& m : train.meta) {
    if (!m.source.empty()) seen.insert(m.source);
  }
  for (const auto& m : test.meta) {
    if (!m.source.empty() && seen.contains(m.source)) {
      throw ContractError("sample '" + m.source + "' appears in both training and test data");
    }
  }
}

ScenarioReport summarize(const std::string& scenario, std::size_t n_classes, std::vector<std::vector<double>> runs) {
  if (runs.empty()) throw ContractError("summarize: no runs");
  ScenarioReport r;
  r.scenario = scenario;
  r.n_classes = n_classes;
  r.mean.assign(n_classes, 0.0);
  r.stddev.assign(n_classes, 0.0);
  for (const auto& run : runs) {
    if (run.size() != n_classes) throw ContractError("summarize: run length differs from class count");
    for (std::size_t i = 0; i < n_classes; ++i) r.mean[i] += run[i];
  }
  const auto m = static_cast<double>(runs.size());
  for (double& v : r.mean) v /= m;
  if (runs.size() > 1) {
    for (const auto& run : runs) {
      for (std::size_t i = 0; i < n_classes; ++i) r.stddev[i] += (run[i] - r.mean[i]) * (run[i] - r.mean[i]);
    }
    for (double& v : r.stddev) v = std::sqrt(v / (m - 1));
  }
  for (std::size_t i = 0; i < n_classes; ++i) r.baseline.push_back(static_cast<double>(i + 1) / n_classes);
  r.runs = std::move(runs);
  return r;
}

nlohmann::json to_json(const ScenarioReport& r) {
  std::vector<std::size_t> n(r.n_classes);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = i + 1;
  return {{"scenario", r.scenario}, {"n_classes", r.n_classes}, {"top_n", n},         {"mean", r.mean},
          {"std", r.stddev},        {"baseline", r.baseline},   {"runs", r.runs.size()}, {"run_curves", r.runs},
          {"config", r.config},     {"details", r.details}};
}

ScenarioReport run_complete_profiling(const LabeledDataset& data, const KeyModelConfig& cfg, std::size_t folds,
                                      std::uint64_t seed) {
  data.validate();
  const auto classes = data.classes();
  std::vector<std::vector<double>> runs;
  for (const auto& split : stratified_kfold(data.labels, folds, seed)) {
    const auto train = data.subset(split.train), test = data.subset(split.test);
    check_disjoint(train, test);
    runs.push_back(top_n_curve(train_key_model(train, cfg), test));
  }
  auto r = summarize("complete-profiling", classes.size(), std::move(runs));
  r.config = {{"folds", folds}, {"seed", seed}, {"key_model", to_json(cfg)}, {"samples", data.size()}};
  return r;
}

const std::string& english_letter_ranking() {
  static const std::string ranking = "eariotnslcudpmhgbfywkvxzjq";
  return ranking;
}

std::vector<std::size_t> frequency_schedule(std::size_t total, std::size_t letters, std::size_t max_per_letter) {
  if (letters == 0 || max_per_letter == 0) throw ContractError("frequency_schedule: empty schedule");
  if (total < letters || total > letters * max_per_letter) {
    throw ContractError("frequency_schedule: total must lie in [letters, letters * max_per_letter]");
  }
  if (letters == 1) return {total};
  const double top = static_cast<double>(max_per_letter);
  // share(r) = 1 + (top - 1) * max(0, 1 - r / m), with m chosen so the shares sum to total
  auto shares = [&](double m) {
    std::vector<double> s(letters);
    for (std::size_t r = 0; r < letters; ++r) s[r] = 1.0 + (top - 1.0) * std::max(0.0, 1.0 - static_cast<double>(r) / m);
    return s;
  };
  auto sum = [&](double m) {
    double acc = 0;
    for (double v : shares(m)) acc += v;
    return acc;
  };
  const double target = static_cast<double>(total);
  double lo = 1e-9, hi = 1e9;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (sum(mid) < target ? lo : hi) = mid;
  }
  auto s = shares(hi);
  std::vector<std::size_t> out(letters);
  std::size_t assigned = 0;
  std::vector<std::pair<double, std::size_t>> frac;
  for (std::size_t r = 0; r < letters; ++r) {
    out[r] = static_cast<std::size_t>(std::floor(s[r] + 1e-12));
    assigned += out[r];
    frac.emplace_back(s[r] - static_cast<double>(out[r]), r);
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < frac.size(); ++i) {
    if (out[frac[i].second] < max_per_letter) {
      ++out[frac[i].second];
      ++assigned;
    }
  }
  return out;
}

LabeledDataset make_frequency_subset(const LabeledDataset& data, std::uint64_t seed, std::size_t total, bool cap) {
  data.validate();
  const auto& ranking = english_letter_ranking();
  const auto classes = data.classes();
  for (const auto& c : classes) {
    if (c.size() != 1 || ranking.find(c[0]) == std::string::npos) {
      throw ContractError("frequency subset needs single-letter labels a-z; got '" + c + "'");
    }
  }
  std::string present;
  for (char c : ranking) {
    if (std::find(classes.begin(), classes.end(), std::string(1, c)) != classes.end()) present += c;
  }
  const auto schedule = frequency_schedule(total, present.size());

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < present.size(); ++r) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == std::string(1, present[r])) idx.push_back(i);
    }
    std::size_t want = schedule[r];
    if (idx.size() < want) {
      if (!cap) {
        throw ContractError("frequency subset: letter '" + std::string(1, present[r]) + "' has " +
                            std::to_string(idx.size()) + " samples, needs " + std::to_string(want));
      }
      want = idx.size();
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(want));
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

ScenarioReport run_small_training(const LabeledDataset& data, const KeyModelConfig& cfg, std::size_t folds,
                                  std::size_t repetitions, std::uint64_t seed, std::size_t total) {
  data.validate();
  const auto classes = data.classes();
  std::vector<std::vector<double>> runs;
  std::size_t fold_index = 0;
  for (const auto& split : stratified_kfold(data.labels, folds, seed)) {
    const auto train_full = data.subset(split.train), test = data.subset(split.test);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const auto train = make_frequency_subset(train_full, derive_seed(seed, {fold_index, rep}), total, true);
      check_disjoint(train, test);
      auto model = train_key_model(train, cfg);
      runs.push_back(top_n_curve(model, test));
    }
    ++fold_index;
  }
  auto r = summarize("small-training", classes.size(), std::move(runs));
  r.config = {{"folds", folds},
              {"repetitions", repetitions},
              {"seed", seed},
              {"subset_total", total},
              {"schedule", frequency_schedule(total, classes.size())},
              {"schedule_note", "per-letter counts capped at what the training fold holds"},
              {"key_model", to_json(cfg)}};
  return r;
}

ScenarioReport run_user_profiling(const LabeledDataset& train_unit, const LabeledDataset& test_unit,
                                  const KeyModelConfig& cfg) {
  train_unit.validate();
  test_unit.validate();
  const auto model = train_key_model(train_unit, cfg);
  auto r = summarize("user-profiling", model.classes.size(), {top_n_curve(model, test_unit)});
  r.config = {{"key_model", to_json(cfg)}, {"train_samples", train_unit.size()}, {"test_samples", test_unit.size()}};
  return r;
}

DeviceClassifier train_device_db(const LabeledDataset& db, int k) {
  LabeledDataset relabelled = db;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db.meta[i].device_model.empty()) throw ContractError("device database rows need a device_model");
    relabelled.labels[i] = db.meta[i].device_model;
  }
  return train_knn(relabelled, k);
}

DeviceDecision classify_device(const DeviceClassifier& db, const std::vector<FeatureVector>& samples,
                               double known_threshold) {
  const auto vote = predict_mode(db, samples);
  return DeviceDecision{vote.label, vote.confidence, vote.confidence >= known_threshold, samples.size()};
}

ModelProfilingResult run_model_profiling(const LabeledDataset& db, const LabeledDataset& victim,
                                         const ModelProfilingConfig& cfg) {
  db.validate();
  victim.validate();
  if (victim.empty()) throw ContractError("model profiling: no victim samples");
  const SampleMeta& v = victim.meta.front();
  for (const auto& m : victim.meta) {
    if (m.user != v.user || m.device_unit != v.device_unit) {
      throw ContractError("model profiling: victim data must come from one user on one unit");
    }
  }
  std::set<std::string> victim_sources;
  for (const auto& m : victim.meta) victim_sources.insert(m.source);

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db.meta[i].user != v.user && !victim_sources.contains(db.meta[i].source)) others.push_back(i);
  }
  if (others.empty()) throw ContractError("model profiling: database holds no other users");
  const auto device_db = db.subset(others);
  check_disjoint(device_db, victim);

  ModelProfilingResult result;
  result.device = classify_device(train_device_db(device_db, cfg.k), victim.vectors, cfg.known_threshold);

  std::map<std::string, std::vector<std::size_t>> by_donor;
  for (std::size_t i = 0; i < device_db.size(); ++i) {
    const auto& m = device_db.meta[i];
    if (m.device_model == result.device.model && m.device_unit != v.device_unit) by_donor[m.user].push_back(i);
  }
  if (by_donor.empty()) throw ContractError("model profiling: no donor data for model '" + result.device.model + "'");

  std::vector<std::vector<double>> runs;
  std::size_t n_classes = 0;
  auto evaluate = [&](const LabeledDataset& train) {
    check_disjoint(train, victim);
    const auto model = train_key_model(train, cfg.key);
    n_classes = model.classes.size();
    runs.push_back(top_n_curve(model, victim));
  };
  if (cfg.crowd) {
    std::vector<std::size_t> all;
    for (const auto& [user, idx] : by_donor) {
      all.insert(all.end(), idx.begin(), idx.end());
      result.donors.push_back(user);
    }
    std::sort(all.begin(), all.end());
    evaluate(device_db.subset(all));
  } else {
    for (const auto& [user, idx] : by_donor) {
      result.donors.push_back(user);
      evaluate(device_db.subset(idx));
    }
  }
  result.report = summarize(cfg.crowd ? "model-profiling-crowd" : "model-profiling", n_classes, std::move(runs));
  result.report.config = {{"key_model", to_json(cfg.key)},
                          {"k", cfg.k},
                          {"known_threshold", cfg.known_threshold},
                          {"crowd", cfg.crowd}};
  result.report.details = {{"victim_user", v.user},
                           {"victim_unit", v.device_unit},
                           {"identified_model", result.device.model},
                           {"device_confidence", result.device.confidence},
                           {"device_known", result.device.known},
                           {"donors", result.donors}};
  return result;
}

}  // namespace keytap
