#include "keytap/dataset.hpp"

#include <algorithm>
#include <set>

#include "keytap/errors.hpp"

namespace keytap {

std::string to_string(TypingStyle style) {
  return style == TypingStyle::kHuntAndPeck ? "HP" : "Touch";
}

TypingStyle typing_style_from_string(const std::string& s) {
  if (s == "HP" || s == "hp") return TypingStyle::kHuntAndPeck;
  if (s == "Touch" || s == "touch") return TypingStyle::kTouch;
  throw ContractError("unknown typing style '" + s + "' (expected HP or Touch)");
}

void LabeledDataset::add(FeatureVector v, std::string label, SampleMeta m) {
  vectors.push_back(std::move(v));
  labels.push_back(std::move(label));
  meta.push_back(std::move(m));
}

void LabeledDataset::validate() const {
  if (vectors.size() != labels.size() || vectors.size() != meta.size()) {
    throw ContractError("dataset vectors, labels and meta differ in length");
  }
  for (const auto& v : vectors) {
    if (v.values.size() != vectors.front().values.size() || v.kind != vectors.front().kind) {
      throw ContractError("dataset vectors differ in length or kind");
    }
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.vectors.reserve(indices.size());
  out.labels.reserve(indices.size());
  out.meta.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw ContractError("subset index out of range");
    out.vectors.push_back(vectors[i]);
    out.labels.push_back(labels[i]);
    out.meta.push_back(meta[i]);
  }
  return out;
}

std::vector<std::string> LabeledDataset::classes() const {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

Eigen::MatrixXd LabeledDataset::matrix() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dimension()));
  for (std::size_t i = 0; i < size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(vectors[i].values.data(), static_cast<Eigen::Index>(dimension()));
  }
  return x;
}

Eigen::MatrixXd LabeledDataset::matrix(const std::vector<std::size_t>& rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dimension()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(vectors[rows[r]].values.data(), static_cast<Eigen::Index>(dimension()));
  }
  return x;
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  LabeledDataset out = a;
  out.vectors.insert(out.vectors.end(), b.vectors.begin(), b.vectors.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.meta.insert(out.meta.end(), b.meta.begin(), b.meta.end());
  return out;
}

}  // namespace keytap
