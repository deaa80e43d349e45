#include <cmath>

#include "internal.hpp"
#include "keytap/errors.hpp"

namespace keytap {

namespace {
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

double softmax_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, int n_classes, double l2,
                         const Eigen::VectorXd& params, Eigen::VectorXd* gradient) {
  const Eigen::Index n = x.rows(), d = x.cols(), k = n_classes;
  if (params.size() != k * d + k) throw ContractError("parameter vector has the wrong size");
  const Eigen::Map<const RowMajor> w(params.data(), k, d);
  const Eigen::Map<const Eigen::VectorXd> b(params.data() + k * d, k);

  Eigen::MatrixXd z = x * w.transpose();
  z.rowwise() += b.transpose();

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss += lse - z(i, y[static_cast<std::size_t>(i)]);
    // z becomes the residual P - Y, reused for the gradient.
    z.row(i) = (z.row(i).array() - lse).exp();
    z(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss = loss * inv_n + 0.5 * l2 * w.squaredNorm();

  if (gradient != nullptr) {
    gradient->resize(params.size());
    Eigen::Map<RowMajor> gw(gradient->data(), k, d);
    gw.noalias() = inv_n * (z.transpose() * x);
    gw += l2 * w;
    Eigen::Map<Eigen::VectorXd>(gradient->data() + k * d, k) = inv_n * z.colwise().sum().transpose();
  }
  return loss;
}

SoftmaxFit fit_softmax(const Eigen::MatrixXd& x, const std::vector<int>& y, int n_classes,
                       const LogisticParams& params, const LinearModel* warm_start) {
  if (!(params.l2 >= 0.0)) throw ContractError("l2 strength must be non-negative");
  const Eigen::Index d = x.cols(), k = n_classes;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(k * d + k);
  if (warm_start != nullptr && warm_start->weights.rows() == k && warm_start->weights.cols() == d) {
    Eigen::Map<RowMajor>(x0.data(), k, d) = warm_start->weights;
    x0.tail(k) = warm_start->bias;
  }
  auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
    return softmax_objective(x, y, n_classes, params.l2, p, g);
  };
  const auto r = detail::minimize_lbfgs(fn, std::move(x0), params.max_iter, params.tol);

  SoftmaxFit fit;
  fit.model.weights = Eigen::Map<const RowMajor>(r.x.data(), k, d);
  fit.model.bias = r.x.tail(k);
  fit.converged = r.converged;
  fit.iterations = r.iterations;
  return fit;
}

KeyClassifier train_logistic_regression(const LabeledDataset& train, const LogisticParams& params,
                                        const std::vector<std::size_t>& selected) {
  auto p = detail::prepare(train, selected, true, 2);
  auto fit = fit_softmax(p.x, p.y, static_cast<int>(p.classes.size()), params);
  KeyClassifier m = detail::shell(ClassifierKind::kLogisticRegression, train, p);
  m.model = std::move(fit.model);
  m.converged = fit.converged;
  m.iterations = fit.iterations;
  return m;
}

}  // namespace keytap
