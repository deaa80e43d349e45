#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "keytap/channel.hpp"
#include "keytap/countermeasure.hpp"
#include "keytap/dataset.hpp"
#include "keytap/features.hpp"
#include "keytap/learners.hpp"
#include "keytap/recording.hpp"
#include "keytap/segmenter.hpp"

namespace keytap {

nlohmann::json to_json(const SegmenterConfig& cfg);
SegmenterConfig segmenter_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EqConfig& cfg);
EqConfig eq_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChannelConfig& cfg);

struct PipelineConfig {
  SegmenterConfig segmenter;
  FeatureConfig features;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// The press peak of a single-keystroke clip: threshold calibrated to one
// detection. A clip with no detectable onset yields the segment at t = 0.
KeystrokeSegment segment_clip(const AudioBuffer& audio, const SegmenterConfig& cfg);

using AudioTransform = std::function<AudioBuffer(const Recording&, std::size_t index)>;

std::vector<KeystrokeSegment> segment_clips(const std::vector<Recording>& recs, const SegmenterConfig& cfg,
                                            const AudioTransform& transform = {});

LabeledDataset featurize(const std::vector<Recording>& recs, const std::vector<KeystrokeSegment>& segs,
                         const FeatureConfig& cfg);
LabeledDataset featurize(const std::vector<Recording>& recs, const PipelineConfig& cfg);

struct KeyModelConfig {
  ClassifierKind kind = ClassifierKind::kLogisticRegression;
  HyperParams params;
  bool rfe = true;
  double rfe_keep_fraction = 0.5;
  double rfe_step = 0.1;
};

nlohmann::json to_json(const KeyModelConfig& cfg);
KeyModelConfig key_model_config_from_json(const nlohmann::json& j);

// RFE (logistic-regression ranking) on `train`, then the configured learner.
KeyClassifier train_key_model(const LabeledDataset& train, const KeyModelConfig& cfg);

// Throws ContractError if any non-empty sample source occurs in both sets.
void check_disjoint(const LabeledDataset& train, const LabeledDataset& test);

struct ScenarioReport {
  std::string scenario;
  std::size_t n_classes = 0;
  std::vector<std::vector<double>> runs;  // top-n curve of each fold or repetition
  std::vector<double> mean;               // index n - 1
  std::vector<double> stddev;
  std::vector<double> baseline;           // n / n_classes
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();

  double top(std::size_t n) const { return mean.at(n - 1); }
};

ScenarioReport summarize(const std::string& scenario, std::size_t n_classes, std::vector<std::vector<double>> runs);
nlohmann::json to_json(const ScenarioReport& r);

ScenarioReport run_complete_profiling(const LabeledDataset& data, const KeyModelConfig& cfg, std::size_t folds = 10,
                                      std::uint64_t seed = 0);

// Letters from most to least frequent in English text.
const std::string& english_letter_ranking();

// Samples kept per frequency rank: 10 for the top letter, falling linearly
// to 1, summing to `total`.
std::vector<std::size_t> frequency_schedule(std::size_t total = 105, std::size_t letters = 26,
                                            std::size_t max_per_letter = 10);

// Random subset following the schedule; `cap` limits each letter to the
// samples available instead of failing.
LabeledDataset make_frequency_subset(const LabeledDataset& data, std::uint64_t seed, std::size_t total = 105,
                                     bool cap = false);

ScenarioReport run_small_training(const LabeledDataset& data, const KeyModelConfig& cfg, std::size_t folds = 10,
                                  std::size_t repetitions = 20, std::uint64_t seed = 0, std::size_t total = 105);

ScenarioReport run_user_profiling(const LabeledDataset& train_unit, const LabeledDataset& test_unit,
                                  const KeyModelConfig& cfg);

struct DeviceDecision {
  std::string model;
  double confidence = 0.0;
  bool known = false;
  std::size_t samples = 0;
};

// k-NN over samples relabelled by device model.
DeviceClassifier train_device_db(const LabeledDataset& db, int k = 10);
DeviceDecision classify_device(const DeviceClassifier& db, const std::vector<FeatureVector>& samples,
                               double known_threshold = 0.33);

struct ModelProfilingConfig {
  KeyModelConfig key;
  int k = 10;
  double known_threshold = 0.33;
  bool crowd = false;
};

struct ModelProfilingResult {
  DeviceDecision device;
  ScenarioReport report;
  std::vector<std::string> donors;
};

// The victim (one user on one unit) is classified against every model in
// `db` not typed by the victim; key models are then trained on other users
// of the identified model on other units, one donor at a time (averaged)
// or pooled when crowd is set.
ModelProfilingResult run_model_profiling(const LabeledDataset& db, const LabeledDataset& victim,
                                         const ModelProfilingConfig& cfg);

std::vector<double> default_sweep_lengths();

struct SweepPoint {
  double length_s;
  ScenarioReport report;
};

// Complete profiling with segments re-extracted at each length. Lengths
// shorter than the spectral window use a single window of that length.
std::vector<SweepPoint> sweep_segment_length(const std::vector<Recording>& recs, const PipelineConfig& pipeline,
                                             const KeyModelConfig& key, const std::vector<double>& lengths,
                                             std::size_t folds = 10, std::uint64_t seed = 0);

struct ChannelPoint {
  std::string setting;  // "plain", "identity" or "<kbps> kbps"
  ChannelConfig channel;
  ScenarioReport report;
};

// Complete profiling with every recording (training and test) sent through
// the channel; per-recording loss seeds derive from `seed`.
std::vector<ChannelPoint> run_channel_sweep(const std::vector<Recording>& recs, const PipelineConfig& pipeline,
                                            const KeyModelConfig& key, const std::vector<double>& kbps,
                                            std::size_t folds = 10, std::uint64_t seed = 0);

struct VoiceSweepConfig {
  std::vector<double> relative_db{-20, -15, -10, -5, 0, 5, 10, 15, 20};
  std::size_t repetitions = 10;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

struct VoicePoint {
  double relative_db;  // kMutedDb for the no-voice run
  ScenarioReport report;
};

// Models train on clean clips; test clips are overlaid with voice.
std::vector<VoicePoint> run_voice_sweep(const std::vector<Recording>& recs, const AudioBuffer& voice,
                                        const PipelineConfig& pipeline, const KeyModelConfig& key,
                                        const VoiceSweepConfig& cfg);

struct CountermeasureConfig {
  std::vector<FeatureKind> kinds{FeatureKind::kMfcc, FeatureKind::kFft};
  EqConfig eq;
  EqSeedMode seed_mode = EqSeedMode::kPerKeystroke;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

struct CountermeasureResult {
  FeatureKind kind;
  ScenarioReport clean;
  ScenarioReport equalized;
};

// Training segments stay clean; test segments are equalized.
std::vector<CountermeasureResult> evaluate_countermeasure(const std::vector<Recording>& recs,
                                                          const PipelineConfig& pipeline, const KeyModelConfig& key,
                                                          const CountermeasureConfig& cfg);

struct ClassifierPoint {
  ClassifierKind kind;
  ScenarioReport report;
};

std::vector<ClassifierPoint> compare_classifiers(const LabeledDataset& data, const KeyModelConfig& base,
                                                 const std::vector<ClassifierKind>& kinds, std::size_t folds = 10,
                                                 std::uint64_t seed = 0);

}  // namespace keytap
