#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"
#include "keytap/errors.hpp"

namespace keytap {

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLogisticRegression: return "lr";
    case ClassifierKind::kLinearSvm: return "svm";
    case ClassifierKind::kLda: return "lda";
    case ClassifierKind::kRandomForest: return "rf";
    case ClassifierKind::kKnn: return "knn";
  }
  return "lr";
}

ClassifierKind classifier_kind_from_string(const std::string& name) {
  if (name == "lr") return ClassifierKind::kLogisticRegression;
  if (name == "svm") return ClassifierKind::kLinearSvm;
  if (name == "lda") return ClassifierKind::kLda;
  if (name == "rf") return ClassifierKind::kRandomForest;
  if (name == "knn") return ClassifierKind::kKnn;
  throw ContractError("unknown classifier kind '" + name + "' (expected lr, svm, lda, rf or knn)");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean();
  s.inv_scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    s.inv_scale(j) = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() * inv_scale.array();
}

Standardizer Standardizer::select(const std::vector<std::size_t>& columns) const {
  Standardizer s;
  s.mean.resize(static_cast<Eigen::Index>(columns.size()));
  s.inv_scale.resize(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    s.mean(static_cast<Eigen::Index>(i)) = mean(static_cast<Eigen::Index>(columns[i]));
    s.inv_scale(static_cast<Eigen::Index>(i)) = inv_scale(static_cast<Eigen::Index>(columns[i]));
  }
  return s;
}

namespace detail {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& columns) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(columns[j]));
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

Prepared prepare(const LabeledDataset& train, const std::vector<std::size_t>& selected, bool standardize,
                 std::size_t min_classes) {
  train.validate();
  if (train.empty()) throw ContractError("training set is empty");
  Prepared p;
  p.classes = train.classes();
  if (p.classes.size() < min_classes) {
    throw ContractError("training needs at least " + std::to_string(min_classes) + " classes, got " +
                        std::to_string(p.classes.size()));
  }
  p.y.reserve(train.size());
  for (const auto& l : train.labels) {
    p.y.push_back(static_cast<int>(std::lower_bound(p.classes.begin(), p.classes.end(), l) - p.classes.begin()));
  }
  const std::size_t d = train.dimension();
  if (selected.empty()) {
    p.selected.resize(d);
    std::iota(p.selected.begin(), p.selected.end(), std::size_t{0});
  } else {
    p.selected = selected;
    std::sort(p.selected.begin(), p.selected.end());
    if (p.selected.back() >= d) throw ContractError("feature mask index out of range");
  }
  Eigen::MatrixXd full = train.matrix();
  p.x = p.selected.size() == d ? std::move(full) : select_columns(full, p.selected);
  if (standardize) {
    p.standardizer = Standardizer::fit(p.x);
  } else {
    p.standardizer.mean = Eigen::RowVectorXd::Zero(p.x.cols());
    p.standardizer.inv_scale = Eigen::RowVectorXd::Ones(p.x.cols());
  }
  p.x = p.standardizer.apply(p.x);
  return p;
}

KeyClassifier shell(ClassifierKind kind, const LabeledDataset& train, Prepared& p) {
  KeyClassifier m;
  m.kind = kind;
  m.classes = p.classes;
  m.input_length = train.dimension();
  m.selected = p.selected;
  m.standardizer = p.standardizer;
  return m;
}

double param(const HyperParams& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

}  // namespace detail

namespace {

Eigen::MatrixXd prepare_rows(const KeyClassifier& m, const Eigen::MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != m.input_length) {
    throw ContractError("feature vector length " + std::to_string(rows.cols()) + " does not match model input length " +
                        std::to_string(m.input_length));
  }
  Eigen::MatrixXd x = m.selected.size() == m.input_length ? rows : detail::select_columns(rows, m.selected);
  return m.standardizer.apply(x);
}

Eigen::MatrixXd knn_votes(const KnnModel& knn, const Eigen::MatrixXd& x, std::size_t n_classes);
Eigen::MatrixXd forest_votes(const ForestModel& forest, const Eigen::MatrixXd& x, std::size_t n_classes);

}  // namespace

Eigen::MatrixXd KeyClassifier::predict_proba(const Eigen::MatrixXd& rows) const {
  const Eigen::MatrixXd x = prepare_rows(*this, rows);
  const std::size_t k = classes.size();
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    Eigen::MatrixXd z = x * lin->weights.transpose();
    z.rowwise() += lin->bias.transpose();
    Eigen::MatrixXd p(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) p.row(i) = detail::softmax(z.row(i).transpose()).transpose();
    return p;
  }
  if (const auto* knn = std::get_if<KnnModel>(&model)) return knn_votes(*knn, x, k);
  return forest_votes(std::get<ForestModel>(model), x, k);
}

Eigen::VectorXd KeyClassifier::predict_proba(std::span<const double> v) const {
  const Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return predict_proba(row).row(0).transpose();
}

namespace {

Eigen::MatrixXd knn_votes(const KnnModel& knn, const Eigen::MatrixXd& x, std::size_t n_classes) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(n_classes));
  const Eigen::VectorXd point_norms = knn.points.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = x * knn.points.transpose();
  const int k = std::min<int>(knn.k, static_cast<int>(knn.points.rows()));
  std::vector<int> order(static_cast<std::size_t>(knn.points.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd dist = point_norms - 2.0 * cross.row(i).transpose();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) { return dist(a) < dist(b) || (dist(a) == dist(b) && a < b); });
    for (int j = 0; j < k; ++j) out(i, knn.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]) += 1.0;
    out.row(i) /= static_cast<double>(k);
  }
  return out;
}

double tree_leaf_prob(const DecisionTree& tree, const Eigen::RowVectorXd& row, std::size_t cls) {
  int node = 0;
  while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    node = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)].distribution[cls];
}

Eigen::MatrixXd forest_votes(const ForestModel& forest, const Eigen::MatrixXd& x, std::size_t n_classes) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(n_classes));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::RowVectorXd row = x.row(i);
    for (const auto& tree : forest.trees) {
      for (std::size_t c = 0; c < n_classes; ++c) out(i, static_cast<Eigen::Index>(c)) += tree_leaf_prob(tree, row, c);
    }
    const double total = out.row(i).sum();
    if (total > 0.0) out.row(i) /= total; else out.row(i).setConstant(1.0 / static_cast<double>(n_classes));
  }
  return out;
}

RankedPrediction rank(const std::vector<std::string>& classes, const Eigen::VectorXd& p) {
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p(static_cast<Eigen::Index>(a)) > p(static_cast<Eigen::Index>(b));
  });
  RankedPrediction r;
  r.ranking.reserve(order.size());
  for (std::size_t i : order) r.ranking.emplace_back(classes[i], p(static_cast<Eigen::Index>(i)));
  return r;
}

}  // namespace

bool RankedPrediction::contains_in_top(const std::string& label, std::size_t n) const {
  const std::size_t limit = std::min(n, ranking.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranking[i].first == label) return true;
  }
  return false;
}

RankedPrediction predict_ranked(const KeyClassifier& model, const FeatureVector& v) {
  return rank(model.classes, model.predict_proba(v.values));
}

std::vector<double> top_n_curve(const KeyClassifier& model, const LabeledDataset& test) {
  if (test.empty()) throw ContractError("top-n accuracy needs a non-empty test set");
  test.validate();
  const Eigen::MatrixXd p = model.predict_proba(test.matrix());
  const std::size_t k = model.classes.size();
  std::vector<double> hits(k, 0.0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = rank(model.classes, p.row(static_cast<Eigen::Index>(i)).transpose());
    for (std::size_t pos = 0; pos < k; ++pos) {
      if (r.ranking[pos].first == test.labels[i]) {
        for (std::size_t n = pos; n < k; ++n) hits[n] += 1.0;
        break;
      }
    }
  }
  for (double& h : hits) h /= static_cast<double>(test.size());
  return hits;
}

double top_n_accuracy(const KeyClassifier& model, const LabeledDataset& test, std::size_t n) {
  if (n < 1 || n > model.classes.size()) {
    throw ContractError("top-n requires 1 <= n <= " + std::to_string(model.classes.size()));
  }
  return top_n_curve(model, test)[n - 1];
}

KeyClassifier train_classifier(ClassifierKind kind, const LabeledDataset& train, const HyperParams& params,
                               const std::vector<std::size_t>& selected) {
  using detail::param;
  switch (kind) {
    case ClassifierKind::kLogisticRegression:
      return train_logistic_regression(
          train, {param(params, "l2", 1e-2), static_cast<int>(param(params, "max_iter", 200)), param(params, "tol", 1e-6)},
          selected);
    case ClassifierKind::kLinearSvm:
      return train_linear_svm(
          train, {param(params, "l2", 1e-2), static_cast<int>(param(params, "max_iter", 200)), param(params, "tol", 1e-6)},
          selected);
    case ClassifierKind::kLda:
      return train_lda(train, {param(params, "shrinkage", 0.1)}, selected);
    case ClassifierKind::kRandomForest:
      return train_random_forest(train,
                                 {static_cast<int>(param(params, "n_trees", 50)), static_cast<int>(param(params, "max_depth", 0)),
                                  static_cast<int>(param(params, "min_samples_leaf", 1)),
                                  param(params, "max_features_fraction", 0.0),
                                  static_cast<std::uint64_t>(param(params, "seed", 1))},
                                 selected);
    case ClassifierKind::kKnn:
      return train_knn(train, static_cast<int>(param(params, "k", 10)), selected);
  }
  throw ContractError("unknown classifier kind");
}

}  // namespace keytap
