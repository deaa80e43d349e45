#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "internal.hpp"
#include "keytap/errors.hpp"

namespace keytap {

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<int>& y;
  std::size_t n_classes;
  const ForestParams& params;
  std::size_t features_per_split;
  std::mt19937_64& rng;
  DecisionTree tree;

  std::vector<double> distribution(const std::vector<int>& rows) const {
    std::vector<double> d(n_classes, 0.0);
    for (int r : rows) d[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])] += 1.0;
    for (double& v : d) v /= static_cast<double>(rows.size());
    return d;
  }

  static double gini(const std::vector<double>& counts, double total) {
    double s = 0.0;
    for (double c : counts) s += c * c;
    return 1.0 - s / (total * total);
  }

  int build(std::vector<int> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    const auto dist = distribution(rows);
    const bool pure = *std::max_element(dist.begin(), dist.end()) == 1.0;
    const bool too_deep = params.max_depth > 0 && depth >= params.max_depth;
    if (pure || too_deep || rows.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
      tree.nodes[static_cast<std::size_t>(id)].distribution = dist;
      return id;
    }

    std::vector<std::size_t> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), std::size_t{0});
    // Partial Fisher-Yates: the first features_per_split entries are the draw.
    for (std::size_t i = 0; i < features_per_split; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features.size() - 1);
      std::swap(features[i], features[pick(rng)]);
    }

    const double total = static_cast<double>(rows.size());
    std::vector<double> all_counts(n_classes, 0.0);
    for (int r : rows) all_counts[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])] += 1.0;
    const double parent = gini(all_counts, total);

    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<int> sorted = rows;
    for (std::size_t fi = 0; fi < features_per_split; ++fi) {
      const auto f = static_cast<Eigen::Index>(features[fi]);
      std::sort(sorted.begin(), sorted.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
      std::vector<double> left(n_classes, 0.0), right = all_counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(sorted[i])]);
        left[c] += 1.0;
        right[c] -= 1.0;
        const double a = x(sorted[i], f), b = x(sorted[i + 1], f);
        if (a == b) continue;
        const double nl = static_cast<double>(i + 1), nr = total - nl;
        if (nl < params.min_samples_leaf || nr < params.min_samples_leaf) continue;
        const double gain = parent - (nl / total) * gini(left, nl) - (nr / total) * gini(right, nr);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (a + b);
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[static_cast<std::size_t>(id)].distribution = dist;
      return id;
    }
    std::vector<int> lrows, rrows;
    for (int r : rows) (x(r, best_feature) <= best_threshold ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(lrows), depth + 1);
    const int r = build(std::move(rrows), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

KeyClassifier train_random_forest(const LabeledDataset& train, const ForestParams& params,
                                  const std::vector<std::size_t>& selected) {
  if (params.n_trees < 1) throw ContractError("forest needs at least one tree");
  // Trees split on raw values; standardization would not change any split.
  auto p = detail::prepare(train, selected, false, 2);
  const auto d = static_cast<std::size_t>(p.x.cols());
  std::size_t per_split = params.max_features_fraction > 0.0
                              ? static_cast<std::size_t>(std::ceil(params.max_features_fraction * static_cast<double>(d)))
                              : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  per_split = std::clamp<std::size_t>(per_split, 1, d);

  std::mt19937_64 rng(params.seed);
  ForestModel forest;
  const auto n = static_cast<std::size_t>(p.x.rows());
  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<int> rows(n);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    for (auto& r : rows) r = static_cast<int>(draw(rng));
    TreeBuilder builder{p.x, p.y, p.classes.size(), params, per_split, rng, {}};
    builder.build(std::move(rows), 0);
    forest.trees.push_back(std::move(builder.tree));
  }

  KeyClassifier m = detail::shell(ClassifierKind::kRandomForest, train, p);
  m.model = std::move(forest);
  return m;
}

}  // namespace keytap
