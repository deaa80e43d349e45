#pragma once

#include <filesystem>

#include "json.hpp"

#include "keytap/features.hpp"
#include "keytap/learners.hpp"

namespace keytap {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const KeyClassifier& model);
KeyClassifier classifier_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FeatureConfig& cfg);
FeatureConfig feature_config_from_json(const nlohmann::json& j);

// A trained model plus the feature configuration it expects.
struct ModelFile {
  KeyClassifier classifier;
  FeatureConfig features;
};

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace keytap
