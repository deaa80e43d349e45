#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "keytap/dataset.hpp"

namespace keytap {

enum class ClassifierKind { kLogisticRegression, kLinearSvm, kLda, kRandomForest, kKnn };

std::string to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& name);

// Per-feature affine map to zero mean and unit variance, fit on training data.
// Constant features keep a unit scale.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd inv_scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Standardizer select(const std::vector<std::size_t>& columns) const;
};

// Linear scores: weights is classes x features.
struct LinearModel {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

struct KnnModel {
  Eigen::MatrixXd points;  // standardized exemplars
  std::vector<int> labels;
  int k = 10;
};

struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> distribution;  // leaf class frequencies
  };
  std::vector<Node> nodes;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
};

struct KeyClassifier {
  ClassifierKind kind = ClassifierKind::kLogisticRegression;
  std::vector<std::string> classes;
  std::size_t input_length = 0;
  std::vector<std::size_t> selected;  // feature mask, as sorted input indices
  Standardizer standardizer;          // over the selected features
  std::variant<LinearModel, KnnModel, ForestModel> model;
  bool converged = true;
  int iterations = 0;

  // Posterior-like probability vector over `classes` (sums to one).
  Eigen::VectorXd predict_proba(std::span<const double> v) const;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& rows) const;
};

using DeviceClassifier = KeyClassifier;

struct RankedPrediction {
  std::vector<std::pair<std::string, double>> ranking;  // descending score

  const std::string& top() const { return ranking.front().first; }
  bool contains_in_top(const std::string& label, std::size_t n) const;
};

RankedPrediction predict_ranked(const KeyClassifier& model, const FeatureVector& v);

// Fraction of samples whose label is within the first n ranked classes.
double top_n_accuracy(const KeyClassifier& model, const LabeledDataset& test, std::size_t n);

// Top-n accuracy for every n in 1..#classes, computed from one ranking pass.
std::vector<double> top_n_curve(const KeyClassifier& model, const LabeledDataset& test);

// ---- logistic regression -------------------------------------------------

struct LogisticParams {
  double l2 = 1e-2;
  int max_iter = 200;
  double tol = 1e-6;
};

// Mean cross-entropy of a softmax model plus (l2/2)||W||^2 (bias unpenalized).
// Parameters are packed as W row-major (classes x features) followed by bias.
double softmax_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, int n_classes, double l2,
                         const Eigen::VectorXd& params, Eigen::VectorXd* gradient);

struct SoftmaxFit {
  LinearModel model;
  bool converged = false;
  int iterations = 0;
};

// Fits on already-standardized rows. `warm_start` may seed the optimizer.
SoftmaxFit fit_softmax(const Eigen::MatrixXd& x, const std::vector<int>& y, int n_classes,
                       const LogisticParams& params, const LinearModel* warm_start = nullptr);

KeyClassifier train_logistic_regression(const LabeledDataset& train, const LogisticParams& params = {},
                                        const std::vector<std::size_t>& selected = {});

// ---- other classifiers ---------------------------------------------------

struct SvmParams {
  double l2 = 1e-2;
  int max_iter = 200;
  double tol = 1e-6;
};

KeyClassifier train_linear_svm(const LabeledDataset& train, const SvmParams& params = {},
                               const std::vector<std::size_t>& selected = {});

struct LdaParams {
  double shrinkage = 0.1;  // blend toward a scaled identity, in [0, 1]
};

KeyClassifier train_lda(const LabeledDataset& train, const LdaParams& params = {},
                        const std::vector<std::size_t>& selected = {});

struct ForestParams {
  int n_trees = 50;
  int max_depth = 0;  // 0: unlimited
  int min_samples_leaf = 1;
  double max_features_fraction = 0.0;  // 0: sqrt(d)
  std::uint64_t seed = 1;
};

KeyClassifier train_random_forest(const LabeledDataset& train, const ForestParams& params = {},
                                  const std::vector<std::size_t>& selected = {});

KeyClassifier train_knn(const LabeledDataset& train, int k = 10, const std::vector<std::size_t>& selected = {});

// Majority label of the k nearest exemplars; ties go to the tied label of the
// nearest exemplar.
std::string knn_predict_label(const KeyClassifier& model, std::span<const double> v);

struct ModeResult {
  std::string label;
  double confidence = 0.0;
  std::map<std::string, std::size_t> votes;
};

// Set-level vote: mode of the per-sample kNN predictions. Confidence is
// (votes for the mode - mean votes per known label) / number of samples.
ModeResult predict_mode(const KeyClassifier& model, const std::vector<FeatureVector>& samples);

// ---- hyper-parameters, validation and selection --------------------------

using HyperParams = std::map<std::string, double>;

KeyClassifier train_classifier(ClassifierKind kind, const LabeledDataset& train, const HyperParams& params = {},
                               const std::vector<std::size_t>& selected = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Each sample lands in exactly one test fold; per-class counts across folds
// differ by at most one.
std::vector<Split> stratified_kfold(const std::vector<std::string>& labels, std::size_t k, std::uint64_t seed);

struct RfeConfig {
  std::size_t target_count = 0;
  double step = 0.1;  // < 1: fraction of the remaining features; >= 1: a count
  LogisticParams lr;
};

// Elimination order: returned[i] is removed before returned[i+1]; the last
// `target_count` entries are the survivors.
std::vector<std::size_t> rfe_ranking(const LabeledDataset& train, const RfeConfig& cfg);

std::vector<std::size_t> rfe_select(const LabeledDataset& train, const RfeConfig& cfg);

struct GridResult {
  HyperParams best;
  std::vector<double> scores;  // inner-CV mean top-1 per grid point
};

GridResult grid_search(ClassifierKind kind, const LabeledDataset& train, const std::vector<HyperParams>& grid,
                       std::size_t folds, std::uint64_t seed);

}  // namespace keytap
