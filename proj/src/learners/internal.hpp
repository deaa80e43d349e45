#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "keytap/learners.hpp"

namespace keytap::detail {

// Training matrix after masking and standardization, with integer labels
// indexing into `classes`.
struct Prepared {
  std::vector<std::string> classes;
  std::vector<int> y;
  std::vector<std::size_t> selected;
  Standardizer standardizer;
  Eigen::MatrixXd x;
};

Prepared prepare(const LabeledDataset& train, const std::vector<std::size_t>& selected, bool standardize,
                 std::size_t min_classes);

KeyClassifier shell(ClassifierKind kind, const LabeledDataset& train, Prepared& p);

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& columns);

Eigen::VectorXd softmax(const Eigen::VectorXd& z);

// Limited-memory BFGS with Armijo backtracking. `objective` returns the value
// and fills the gradient.
struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

LbfgsResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& objective,
                           Eigen::VectorXd x0, int max_iter, double tol, int history = 10);

double param(const HyperParams& p, const std::string& key, double fallback);

}  // namespace keytap::detail
