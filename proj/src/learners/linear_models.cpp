#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"
#include "keytap/errors.hpp"

namespace keytap {

namespace {
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One-vs-rest squared hinge, summed over classes.
double ovr_squared_hinge(const Eigen::MatrixXd& x, const std::vector<int>& y, Eigen::Index k, double l2,
                         const Eigen::VectorXd& params, Eigen::VectorXd* gradient) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Eigen::Map<const RowMajor> w(params.data(), k, d);
  const Eigen::Map<const Eigen::VectorXd> b(params.data() + k * d, k);
  Eigen::MatrixXd z = x * w.transpose();
  z.rowwise() += b.transpose();

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const double t = (y[static_cast<std::size_t>(i)] == c) ? 1.0 : -1.0;
      const double slack = 1.0 - t * z(i, c);
      if (slack > 0.0) {
        loss += slack * slack;
        z(i, c) = -2.0 * t * slack;
      } else {
        z(i, c) = 0.0;
      }
    }
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

}  // namespace

KeyClassifier train_linear_svm(const LabeledDataset& train, const SvmParams& params,
                               const std::vector<std::size_t>& selected) {
  auto p = detail::prepare(train, selected, true, 2);
  const Eigen::Index k = static_cast<Eigen::Index>(p.classes.size()), d = p.x.cols();
  auto fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) { return ovr_squared_hinge(p.x, p.y, k, params.l2, v, g); };
  const auto r = detail::minimize_lbfgs(fn, Eigen::VectorXd::Zero(k * d + k), params.max_iter, params.tol);

  KeyClassifier m = detail::shell(ClassifierKind::kLinearSvm, train, p);
  m.model = LinearModel{Eigen::Map<const RowMajor>(r.x.data(), k, d), r.x.tail(k)};
  m.converged = r.converged;
  m.iterations = r.iterations;
  return m;
}

KeyClassifier train_lda(const LabeledDataset& train, const LdaParams& params, const std::vector<std::size_t>& selected) {
  if (params.shrinkage < 0.0 || params.shrinkage > 1.0) throw ContractError("LDA shrinkage must lie in [0, 1]");
  auto p = detail::prepare(train, selected, true, 2);
  const Eigen::Index k = static_cast<Eigen::Index>(p.classes.size()), d = p.x.cols(), n = p.x.rows();

  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    means.row(p.y[static_cast<std::size_t>(i)]) += p.x.row(i);
    counts(p.y[static_cast<std::size_t>(i)]) += 1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) means.row(c) /= counts(c);

  Eigen::MatrixXd centered = p.x;
  for (Eigen::Index i = 0; i < n; ++i) centered.row(i) -= means.row(p.y[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  const double mu = cov.trace() / static_cast<double>(d);
  cov *= (1.0 - params.shrinkage);
  cov.diagonal().array() += params.shrinkage * (mu > 0.0 ? mu : 1.0) + 1e-9;

  const Eigen::LDLT<Eigen::MatrixXd> solver(cov);
  const Eigen::MatrixXd w = solver.solve(means.transpose()).transpose();  // k x d
  Eigen::VectorXd bias(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    bias(c) = -0.5 * w.row(c).dot(means.row(c)) + std::log(counts(c) / static_cast<double>(n));
  }

  KeyClassifier m = detail::shell(ClassifierKind::kLda, train, p);
  m.model = LinearModel{w, bias};
  return m;
}

KeyClassifier train_knn(const LabeledDataset& train, int k, const std::vector<std::size_t>& selected) {
  if (k < 1) throw ContractError("k must be positive");
  if (static_cast<std::size_t>(k) > train.size()) {
    throw ContractError("k = " + std::to_string(k) + " exceeds the " + std::to_string(train.size()) + " training samples");
  }
  auto p = detail::prepare(train, selected, true, 1);
  KeyClassifier m = detail::shell(ClassifierKind::kKnn, train, p);
  m.model = KnnModel{std::move(p.x), std::move(p.y), k};
  return m;
}

namespace {

// Label per row of `rows` (raw input features), by the kNN vote rule.
std::vector<std::string> knn_labels(const KeyClassifier& model, const Eigen::MatrixXd& rows) {
  const auto* knn = std::get_if<KnnModel>(&model.model);
  if (knn == nullptr) throw ContractError("kNN prediction needs a kNN model");
  if (static_cast<std::size_t>(rows.cols()) != model.input_length) {
    throw ContractError("feature vector length does not match the model");
  }
  Eigen::MatrixXd x(rows.rows(), static_cast<Eigen::Index>(model.selected.size()));
  for (std::size_t j = 0; j < model.selected.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = rows.col(static_cast<Eigen::Index>(model.selected[j]));
  }
  x = (x.rowwise() - model.standardizer.mean).array().rowwise() * model.standardizer.inv_scale.array();

  const Eigen::VectorXd point_norms = knn->points.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = x * knn->points.transpose();
  const int k = std::min<int>(knn->k, static_cast<int>(knn->points.rows()));
  std::vector<int> order(static_cast<std::size_t>(knn->points.rows()));
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    // |q - p|^2 up to the constant |q|^2
    const Eigen::VectorXd dist = point_norms - 2.0 * cross.row(i).transpose();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) { return dist(a) < dist(b) || (dist(a) == dist(b) && a < b); });
    std::vector<int> votes(model.classes.size(), 0);
    for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(knn->labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])])];
    const int best = *std::max_element(votes.begin(), votes.end());
    // Among tied labels, the one whose exemplar is nearest wins.
    for (int j = 0; j < k; ++j) {
      const int label = knn->labels[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      if (votes[static_cast<std::size_t>(label)] == best) {
        out.push_back(model.classes[static_cast<std::size_t>(label)]);
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::string knn_predict_label(const KeyClassifier& model, std::span<const double> v) {
  const Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return knn_labels(model, row).front();
}

ModeResult predict_mode(const KeyClassifier& model, const std::vector<FeatureVector>& samples) {
  if (samples.empty()) throw ContractError("predict_mode needs at least one sample");
  ModeResult r;
  for (const auto& c : model.classes) r.votes[c] = 0;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(model.input_length));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].values.size() != model.input_length) throw ContractError("feature vector length does not match the model");
    rows.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(samples[i].values.data(), static_cast<Eigen::Index>(model.input_length));
  }
  for (const auto& label : knn_labels(model, rows)) ++r.votes[label];

  std::size_t best = 0;
  for (const auto& c : model.classes) {  // fixed class order breaks ties
    if (r.votes[c] > best) {
      best = r.votes[c];
      r.label = c;
    }
  }
  const double total = static_cast<double>(samples.size());
  const double mean_votes = total / static_cast<double>(model.classes.size());
  r.confidence = (static_cast<double>(best) - mean_votes) / total;
  return r;
}

}  // namespace keytap
