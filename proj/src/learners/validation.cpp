#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <limits>
#include <random>

#include "internal.hpp"
#include "keytap/errors.hpp"

namespace keytap {

std::vector<Split> stratified_kfold(const std::vector<std::string>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ContractError("stratified k-fold needs k >= 2 (k = " + std::to_string(k) + " leaves no held-out data)");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < k) {
      throw ContractError("class '" + label + "' has " + std::to_string(idx.size()) + " samples, fewer than k = " +
                          std::to_string(k));
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold_of(labels.size());
  std::vector<std::size_t> fold_sizes(k, 0);
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    // Start each class's round-robin at the currently smallest fold so that
    // remainders spread across folds instead of piling onto fold 0.
    const std::size_t start = static_cast<std::size_t>(
        std::min_element(fold_sizes.begin(), fold_sizes.end()) - fold_sizes.begin());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t f = (start + j) % k;
      fold_of[idx[j]] = f;
      ++fold_sizes[f];
    }
  }

  std::vector<Split> splits(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? splits[f].test : splits[f].train).push_back(i);
  }
  return splits;
}

std::vector<std::size_t> rfe_ranking(const LabeledDataset& train, const RfeConfig& cfg) {
  const std::size_t d = train.dimension();
  if (cfg.target_count < 1) throw ContractError("RFE target_count must be at least 1");
  if (cfg.target_count > d) {
    throw ContractError("RFE target_count " + std::to_string(cfg.target_count) + " exceeds the " + std::to_string(d) +
                        " available features");
  }
  if (!(cfg.step > 0.0)) throw ContractError("RFE step must be positive");

  auto p = detail::prepare(train, {}, true, 2);
  std::vector<std::size_t> remaining(d);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> eliminated;
  eliminated.reserve(d);
  const int k = static_cast<int>(p.classes.size());

  LinearModel warm;
  bool have_warm = false;
  while (remaining.size() > cfg.target_count) {
    const Eigen::MatrixXd x = detail::select_columns(p.x, remaining);
    const auto fit = fit_softmax(x, p.y, k, cfg.lr, have_warm ? &warm : nullptr);

    const std::size_t step = cfg.step < 1.0
                                 ? std::max<std::size_t>(1, static_cast<std::size_t>(cfg.step * static_cast<double>(remaining.size())))
                                 : static_cast<std::size_t>(cfg.step);
    const std::size_t drop = std::min(step, remaining.size() - cfg.target_count);

    const Eigen::VectorXd importance = fit.model.weights.cwiseAbs().colwise().sum().transpose();
    std::vector<std::size_t> order(remaining.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return importance(static_cast<Eigen::Index>(a)) < importance(static_cast<Eigen::Index>(b));
    });

    std::vector<bool> removed(remaining.size(), false);
    for (std::size_t i = 0; i < drop; ++i) removed[order[i]] = true;
    std::vector<std::size_t> kept_cols;
    for (std::size_t i = 0; i < drop; ++i) eliminated.push_back(remaining[order[i]]);
    std::vector<std::size_t> next;
    next.reserve(remaining.size() - drop);
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (!removed[i]) {
        next.push_back(remaining[i]);
        kept_cols.push_back(i);
      }
    }
    warm.weights = detail::select_columns(fit.model.weights, kept_cols);
    warm.bias = fit.model.bias;
    have_warm = true;
    remaining = std::move(next);
  }
  eliminated.insert(eliminated.end(), remaining.begin(), remaining.end());
  return eliminated;
}

std::vector<std::size_t> rfe_select(const LabeledDataset& train, const RfeConfig& cfg) {
  const auto ranking = rfe_ranking(train, cfg);
  std::vector<std::size_t> mask(ranking.end() - static_cast<std::ptrdiff_t>(cfg.target_count), ranking.end());
  std::sort(mask.begin(), mask.end());
  return mask;
}

GridResult grid_search(ClassifierKind kind, const LabeledDataset& train, const std::vector<HyperParams>& grid,
                       std::size_t folds, std::uint64_t seed) {
  if (grid.empty()) throw ContractError("grid search needs a non-empty grid");
  GridResult result;
  result.best = grid.front();
  if (grid.size() == 1) {
    result.scores.push_back(std::numeric_limits<double>::quiet_NaN());
    return result;
  }
  const auto splits = stratified_kfold(train.labels, folds, seed);
  double best = -1.0;
  for (const auto& point : grid) {
    double total = 0.0;
    for (const auto& s : splits) {
      const auto model = train_classifier(kind, train.subset(s.train), point);
      total += top_n_accuracy(model, train.subset(s.test), 1);
    }
    const double score = total / static_cast<double>(splits.size());
    result.scores.push_back(score);
    if (score > best) {  // strict: first grid point wins ties
      best = score;
      result.best = point;
    }
  }
  return result;
}

}  // namespace keytap
