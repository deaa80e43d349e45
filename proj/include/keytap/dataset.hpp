#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "keytap/features.hpp"

namespace keytap {

enum class TypingStyle { kHuntAndPeck, kTouch };

std::string to_string(TypingStyle style);
TypingStyle typing_style_from_string(const std::string& s);

// Provenance of one sample. `source` identifies the recording it came from
// and is what leakage checks compare.
struct SampleMeta {
  std::string user;
  std::string device_model;
  std::string device_unit;
  TypingStyle typing_style = TypingStyle::kTouch;
  std::string channel = "plain";
  std::string source;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

struct LabeledDataset {
  std::vector<FeatureVector> vectors;
  std::vector<std::string> labels;
  std::vector<SampleMeta> meta;

  std::size_t size() const { return vectors.size(); }
  bool empty() const { return vectors.empty(); }
  std::size_t dimension() const { return vectors.empty() ? 0 : vectors.front().values.size(); }

  void add(FeatureVector v, std::string label, SampleMeta m = {});

  // Throws ContractError if lengths disagree or vectors differ in size/kind.
  void validate() const;

  LabeledDataset subset(const std::vector<std::size_t>& indices) const;

  // Sorted distinct labels: the fixed class order used for tie-breaking.
  std::vector<std::string> classes() const;

  Eigen::MatrixXd matrix() const;
  Eigen::MatrixXd matrix(const std::vector<std::size_t>& rows) const;
};

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

}  // namespace keytap
