#include <algorithm>
#include <cmath>
#include <cstdio>

#include "keytap/errors.hpp"
#include "keytap/random.hpp"
#include "keytap/scenarios.hpp"

namespace keytap {

namespace {

std::vector<std::vector<double>> fold_curves(const LabeledDataset& data, const std::vector<Split>& splits,
                                             const KeyModelConfig& key) {
  std::vector<std::vector<double>> runs;
  for (const auto& split : splits) {
    const auto train = data.subset(split.train), test = data.subset(split.test);
    check_disjoint(train, test);
    runs.push_back(top_n_curve(train_key_model(train, key), test));
  }
  return runs;
}

std::vector<std::string> labels_of(const std::vector<Recording>& recs) {
  std::vector<std::string> out;
  for (const auto& r : recs) out.push_back(r.label);
  return out;
}

}  // namespace

std::vector<double> default_sweep_lengths() {
  std::vector<double> out{0.003};
  for (int ms = 10; ms <= 100; ms += 10) out.push_back(ms / 1000.0);
  return out;
}

std::vector<SweepPoint> sweep_segment_length(const std::vector<Recording>& recs, const PipelineConfig& pipeline,
                                             const KeyModelConfig& key, const std::vector<double>& lengths,
                                             std::size_t folds, std::uint64_t seed) {
  if (lengths.empty()) throw ContractError("sweep_segment_length: no lengths");
  const auto splits = stratified_kfold(labels_of(recs), folds, seed);
  std::vector<SweepPoint> out;
  for (double len : lengths) {
    if (!(len > 0)) throw ContractError("segment lengths must be positive");
    PipelineConfig p = pipeline;
    p.segmenter.segment_length_s = len;
    if (len < p.features.spectral.window_s) {
      p.features.spectral.window_s = len;
      p.features.spectral.step_s = len;
    }
    const auto data = featurize(recs, p);
    auto r = summarize("segment-length", data.classes().size(), fold_curves(data, splits, key));
    r.config = {{"segment_length_s", len},
                {"window_s", p.features.spectral.window_s},
                {"step_s", p.features.spectral.step_s},
                {"folds", folds},
                {"seed", seed},
                {"key_model", to_json(key)}};
    out.push_back(SweepPoint{len, std::move(r)});
  }
  return out;
}

std::vector<ChannelPoint> run_channel_sweep(const std::vector<Recording>& recs, const PipelineConfig& pipeline,
                                            const KeyModelConfig& key, const std::vector<double>& kbps,
                                            std::size_t folds, std::uint64_t seed) {
  const auto splits = stratified_kfold(labels_of(recs), folds, seed);
  std::vector<ChannelPoint> out;

  auto run = [&](const std::string& name, const ChannelConfig* channel) {
    AudioTransform t;
    if (channel) {
      t = [&](const Recording& r, std::size_t i) {
        ChannelConfig c = *channel;
        c.seed = derive_seed(seed, {static_cast<std::uint64_t>(std::llround(channel->target_kbps)), i});
        return simulate_channel(r.audio, c);
      };
    }
    auto data = featurize(recs, segment_clips(recs, pipeline.segmenter, t), pipeline.features);
    if (channel) {
      for (auto& m : data.meta) m.channel = name;
    }
    auto r = summarize("channel", data.classes().size(), fold_curves(data, splits, key));
    r.config = {{"setting", name}, {"folds", folds}, {"seed", seed}, {"key_model", to_json(key)}};
    if (channel) {
      r.config["cutoff_hz"] = std::isfinite(channel->cutoff_hz) ? nlohmann::json(channel->cutoff_hz) : nlohmann::json("none");
      r.config["loss_rate"] = channel->loss_rate;
      r.config["packet_ms"] = channel->packet_ms;
      r.config["note"] = "simulated channel: low-pass plus packet loss, not a real codec";
    }
    out.push_back(ChannelPoint{name, channel ? *channel : ChannelConfig::identity(), std::move(r)});
  };

  run("plain", nullptr);
  const auto identity = ChannelConfig::identity();
  run("identity", &identity);
  for (double k : kbps) {
    const auto c = ChannelConfig::for_bitrate(k);
    char name[32];
    std::snprintf(name, sizeof name, "%g kbps", k);
    run(name, &c);
  }
  return out;
}

std::vector<VoicePoint> run_voice_sweep(const std::vector<Recording>& recs, const AudioBuffer& voice,
                                        const PipelineConfig& pipeline, const KeyModelConfig& key,
                                        const VoiceSweepConfig& cfg) {
  if (cfg.repetitions == 0) throw ContractError("voice sweep needs at least one repetition");
  const auto clean = featurize(recs, pipeline);
  const auto splits = stratified_kfold(clean.labels, cfg.folds, cfg.seed);
  const auto n_classes = clean.classes().size();

  std::vector<double> levels{kMutedDb};
  levels.insert(levels.end(), cfg.relative_db.begin(), cfg.relative_db.end());
  std::vector<std::vector<std::vector<double>>> runs(levels.size());

  for (std::size_t f = 0; f < splits.size(); ++f) {
    const auto& split = splits[f];
    const auto model = train_key_model(clean.subset(split.train), key);
    std::vector<Recording> test_recs;
    for (auto i : split.test) test_recs.push_back(recs[i]);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const std::size_t reps = l == 0 ? 1 : cfg.repetitions;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        AudioTransform t = [&](const Recording& r, std::size_t i) {
          return mix_voice(r.audio, voice, MixConfig{levels[l]}, derive_seed(cfg.seed, {f, l, rep, i}));
        };
        const auto test = featurize(test_recs, segment_clips(test_recs, pipeline.segmenter, t), pipeline.features);
        runs[l].push_back(top_n_curve(model, test));
      }
    }
  }

  std::vector<VoicePoint> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto r = summarize("voice-overlay", n_classes, std::move(runs[l]));
    r.config = {{"relative_db", std::isfinite(levels[l]) ? nlohmann::json(levels[l]) : nlohmann::json("muted")},
                {"repetitions", l == 0 ? 1 : cfg.repetitions},
                {"folds", cfg.folds},
                {"seed", cfg.seed},
                {"key_model", to_json(key)}};
    out.push_back(VoicePoint{levels[l], std::move(r)});
  }
  return out;
}

std::vector<CountermeasureResult> evaluate_countermeasure(const std::vector<Recording>& recs,
                                                          const PipelineConfig& pipeline, const KeyModelConfig& key,
                                                          const CountermeasureConfig& cfg) {
  if (cfg.kinds.empty()) throw ContractError("countermeasure evaluation needs at least one feature kind");
  const auto segs = segment_clips(recs, pipeline.segmenter);
  EqConfig eq = cfg.eq;
  eq.seed = cfg.seed;
  const auto equalized = randomize_eq_batch(segs, eq, cfg.seed_mode);
  const auto splits = stratified_kfold(labels_of(recs), cfg.folds, cfg.seed);

  std::vector<CountermeasureResult> out;
  for (FeatureKind kind : cfg.kinds) {
    FeatureConfig fc = pipeline.features;
    fc.kind = kind;
    const auto clean = featurize(recs, segs, fc);
    auto eq_data = featurize(recs, equalized, fc);
    for (auto& m : eq_data.meta) m.channel = "equalized";
    std::vector<std::vector<double>> clean_runs, eq_runs;
    for (const auto& split : splits) {
      const auto train = clean.subset(split.train);
      const auto model = train_key_model(train, key);
      const auto test_clean = clean.subset(split.test), test_eq = eq_data.subset(split.test);
      check_disjoint(train, test_eq);
      clean_runs.push_back(top_n_curve(model, test_clean));
      eq_runs.push_back(top_n_curve(model, test_eq));
    }
    const auto n = clean.classes().size();
    CountermeasureResult res{kind, summarize("countermeasure-clean", n, std::move(clean_runs)),
                             summarize("countermeasure-equalized", n, std::move(eq_runs))};
    const nlohmann::json common = {{"features", to_string(kind)},
                                   {"folds", cfg.folds},
                                   {"seed", cfg.seed},
                                   {"seed_mode", to_string(cfg.seed_mode)},
                                   {"eq",
                                    {{"n_bands", cfg.eq.n_bands},
                                     {"center_min_hz", cfg.eq.center_min_hz},
                                     {"center_max_hz", cfg.eq.center_max_hz},
                                     {"q", cfg.eq.q},
                                     {"gain_min_db", cfg.eq.gain_min_db},
                                     {"gain_max_db", cfg.eq.gain_max_db},
                                     {"distribution", "centers uniform in Hz, gains uniform in dB"}}},
                                   {"key_model", to_json(key)}};
    res.clean.config = common;
    res.equalized.config = common;
    out.push_back(std::move(res));
  }
  return out;
}

std::vector<ClassifierPoint> compare_classifiers(const LabeledDataset& data, const KeyModelConfig& base,
                                                 const std::vector<ClassifierKind>& kinds, std::size_t folds,
                                                 std::uint64_t seed) {
  const auto splits = stratified_kfold(data.labels, folds, seed);
  std::vector<ClassifierPoint> out;
  for (auto kind : kinds) {
    KeyModelConfig k = base;
    k.kind = kind;
    auto r = summarize("classifier-" + to_string(kind), data.classes().size(), fold_curves(data, splits, k));
    r.config = {{"folds", folds}, {"seed", seed}, {"key_model", to_json(k)}};
    out.push_back(ClassifierPoint{kind, std::move(r)});
  }
  return out;
}

}  // namespace keytap
