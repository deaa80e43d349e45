#include <algorithm>
#include <cmath>
#include <random>
#include <numeric>
#include <set>

#include "doctest.h"
#include "keytap/errors.hpp"
#include "keytap/learners.hpp"
#include "keytap/model_io.hpp"

using namespace keytap;

namespace {

FeatureVector fv(std::vector<double> v) { return FeatureVector{std::move(v), FeatureKind::kMfcc, 1, 0}; }

// Gaussian blobs: `classes` centres drawn with the given spread.
LabeledDataset blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double separation,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> centres(classes, std::vector<double>(dim));
  for (auto& c : centres) {
    for (double& v : c) v = separation * g(rng);
  }
  LabeledDataset d;
  for (std::size_t r = 0; r < per_class; ++r) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<double> x(dim);
      for (std::size_t j = 0; j < dim; ++j) x[j] = centres[c][j] + g(rng);
      d.add(fv(x), std::string(1, static_cast<char>('a' + c)));
    }
  }
  return d;
}

}  // namespace

TEST_CASE("logistic regression on separable 1-D data") {
  LabeledDataset d;
  d.add(fv({-1.0}), "A");
  d.add(fv({1.0}), "B");
  const auto m = train_logistic_regression(d);
  CHECK(top_n_accuracy(m, d, 1) == 1.0);
  CHECK(m.converged);
}

TEST_CASE("logistic regression contracts") {
  LabeledDataset one;
  one.add(fv({1.0}), "A");
  one.add(fv({2.0}), "A");
  CHECK_THROWS_AS(train_logistic_regression(one), ContractError);

  const auto d = blobs(3, 10, 4, 3.0, 1);
  LogisticParams p;
  p.max_iter = 1;
  CHECK_FALSE(train_logistic_regression(d, p).converged);

  const auto m = train_logistic_regression(d);
  CHECK_THROWS_AS(predict_ranked(m, fv({1.0, 2.0})), ContractError);
  CHECK_THROWS_AS(top_n_accuracy(m, d, 0), ContractError);
  CHECK_THROWS_AS(top_n_accuracy(m, d, 4), ContractError);
  CHECK_THROWS_AS(top_n_accuracy(m, LabeledDataset{}, 1), ContractError);
}

TEST_CASE("duplicated feature gives the same predictions") {
  LabeledDataset single, doubled;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 60; ++i) {
    const int c = i % 3;
    const double x = 2.0 * c + 0.7 * g(rng);
    single.add(fv({x}), std::to_string(c));
    doubled.add(fv({x, x}), std::to_string(c));
  }
  LogisticParams weak;
  weak.l2 = 1e-8;
  weak.max_iter = 2000;
  weak.tol = 1e-12;
  const auto a = train_logistic_regression(single, weak), b = train_logistic_regression(doubled, weak);
  for (double x = -3.0; x <= 7.0; x += 0.05) {
    CHECK(predict_ranked(a, fv({x})).top() == predict_ranked(b, fv({x, x})).top());
  }

  // Splitting a weight over two copies halves its penalty.
  LogisticParams half, full;
  half.l2 = 0.05;
  full.l2 = 0.1;
  half.tol = full.tol = 1e-12;
  half.max_iter = full.max_iter = 2000;
  const auto s = train_logistic_regression(single, half), t = train_logistic_regression(doubled, full);
  for (double x = -3.0; x <= 7.0; x += 0.05) {
    const Eigen::VectorXd ps = s.predict_proba(std::vector<double>{x});
    const Eigen::VectorXd pt = t.predict_proba(std::vector<double>{x, x});
    CHECK((ps - pt).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("softmax gradient matches central finite differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8, d = 5, k = 3;
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = g(rng);
    }
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(rng() % k);
    Eigen::VectorXd w(k * d + k);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = g(rng);
    const double l2 = 0.3 * trial;
    Eigen::VectorXd grad;
    softmax_objective(x, y, k, l2, w, &grad);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double h = 1e-6;
      Eigen::VectorXd wp = w, wm = w;
      wp(i) += h;
      wm(i) -= h;
      const double fd = (softmax_objective(x, y, k, l2, wp, nullptr) - softmax_objective(x, y, k, l2, wm, nullptr)) / (2 * h);
      CHECK(std::abs(fd - grad(i)) <= 1e-5 * std::max(1.0, std::abs(grad(i))));
    }
  }
}

TEST_CASE("predict_ranked") {
  SUBCASE("exact training vector ranks its own class first") {
    const auto d = blobs(5, 1, 6, 4.0, 3);
    const auto m = train_logistic_regression(d);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(predict_ranked(m, d.vectors[i]).top() == d.labels[i]);
  }
  SUBCASE("zero-weight model is uniform and keeps class order") {
    const auto d = blobs(4, 3, 2, 1.0, 4);
    auto m = train_logistic_regression(d);
    auto& lin = std::get<LinearModel>(m.model);
    lin.weights.setZero();
    lin.bias.setZero();
    const auto r = predict_ranked(m, d.vectors[0]);
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
      CHECK(r.ranking[i].first == m.classes[i]);
      CHECK(r.ranking[i].second == doctest::Approx(0.25));
    }
  }
  SUBCASE("every kind returns a permutation with a probability vector") {
    const auto d = blobs(6, 8, 5, 2.0, 5);
    for (auto kind : {ClassifierKind::kLogisticRegression, ClassifierKind::kLinearSvm, ClassifierKind::kLda,
                      ClassifierKind::kRandomForest, ClassifierKind::kKnn}) {
      const auto m = train_classifier(kind, d, {{"k", 5}});
      std::mt19937_64 rng(6);
      std::normal_distribution<double> g(0.0, 3.0);
      for (int t = 0; t < 20; ++t) {
        std::vector<double> q(5);
        for (double& v : q) v = g(rng);
        const auto p = m.predict_proba(q);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
        const auto r = predict_ranked(m, fv(q));
        std::set<std::string> seen;
        for (std::size_t i = 0; i < r.ranking.size(); ++i) {
          seen.insert(r.ranking[i].first);
          if (i > 0) CHECK(r.ranking[i - 1].second >= r.ranking[i].second);
        }
        CHECK(seen.size() == m.classes.size());
      }
    }
  }
}

TEST_CASE("argmax is invariant to monotone score transforms") {
  const auto d = blobs(5, 6, 4, 2.0, 8);
  const auto m = train_logistic_regression(d);
  for (const auto& v : d.vectors) {
    const Eigen::VectorXd p = m.predict_proba(v.values);
    Eigen::Index a, b, c;
    p.maxCoeff(&a);
    p.array().log().maxCoeff(&b);
    (p.array().cube() * 5.0 + 1.0).maxCoeff(&c);
    CHECK(a == b);
    CHECK(a == c);
  }
}

TEST_CASE("top-n curve is monotone and reaches one") {
  const auto d = blobs(8, 10, 6, 1.0, 9);
  const auto splits = stratified_kfold(d.labels, 5, 1);
  const auto m = train_logistic_regression(d.subset(splits[0].train));
  const auto curve = top_n_curve(m, d.subset(splits[0].test));
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
  CHECK(curve.back() == 1.0);
  CHECK(top_n_accuracy(m, d.subset(splits[0].test), 8) == 1.0);
}

TEST_CASE("stratified_kfold") {
  std::vector<std::string> labels;
  for (int r = 0; r < 10; ++r) {
    for (char c = 'a'; c <= 'z'; ++c) labels.emplace_back(1, c);
  }
  SUBCASE("26 classes x 10 into 10 folds has one sample per class per fold") {
    const auto splits = stratified_kfold(labels, 10, 3);
    REQUIRE(splits.size() == 10);
    std::vector<int> seen(labels.size(), 0);
    for (const auto& s : splits) {
      CHECK(s.test.size() == 26);
      CHECK(s.train.size() == 234);
      std::set<std::string> classes;
      for (auto i : s.test) {
        classes.insert(labels[i]);
        ++seen[i];
      }
      CHECK(classes.size() == 26);
    }
    for (int c : seen) CHECK(c == 1);
  }
  SUBCASE("uneven classes stay within one sample of proportional") {
    std::vector<std::string> uneven;
    for (int i = 0; i < 37; ++i) uneven.push_back("x");
    for (int i = 0; i < 13; ++i) uneven.push_back("y");
    for (int i = 0; i < 5; ++i) uneven.push_back("z");
    const auto splits = stratified_kfold(uneven, 4, 9);
    std::vector<int> seen(uneven.size(), 0);
    for (const auto& s : splits) {
      for (const std::string cls : {"x", "y", "z"}) {
        const double global = static_cast<double>(std::count(uneven.begin(), uneven.end(), cls)) / 4.0;
        const auto in_fold = std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return uneven[i] == cls; });
        CHECK(std::abs(static_cast<double>(in_fold) - global) <= 1.0);
      }
      for (auto i : s.test) ++seen[i];
      CHECK(s.train.size() + s.test.size() == uneven.size());
    }
    for (int c : seen) CHECK(c == 1);
  }
  SUBCASE("k = 1 and under-populated classes are rejected") {
    CHECK_THROWS_AS(stratified_kfold(labels, 1, 0), ContractError);
    std::vector<std::string> small = {"a", "a", "b"};
    try {
      stratified_kfold(small, 2, 0);
      FAIL("expected ContractError");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
  }
}

TEST_CASE("RFE keeps the informative feature") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    LabeledDataset d;
    for (int i = 0; i < 40; ++i) {
      const double y = (i % 2 == 0) ? 1.0 : -1.0;
      std::vector<double> x(10);
      x[0] = y;
      for (std::size_t j = 1; j < x.size(); ++j) x[j] = g(rng);
      d.add(fv(x), y > 0 ? "pos" : "neg");
    }
    RfeConfig cfg;
    cfg.target_count = 1;
    cfg.step = 1;
    const auto mask = rfe_select(d, cfg);
    if (mask.size() == 1 && mask[0] == 0) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("RFE masks") {
  const auto d = blobs(4, 10, 20, 1.5, 11);
  RfeConfig cfg;
  cfg.target_count = 20;
  std::vector<std::size_t> all(20);
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(rfe_select(d, cfg) == all);

  std::vector<std::size_t> previous = all;
  for (std::size_t target : {15, 10, 6, 3, 1}) {
    cfg.target_count = target;
    const auto mask = rfe_select(d, cfg);
    CHECK(mask.size() == target);
    CHECK(std::includes(previous.begin(), previous.end(), mask.begin(), mask.end()));
    previous = mask;
  }
  cfg.target_count = 21;
  CHECK_THROWS_AS(rfe_select(d, cfg), ContractError);
  cfg.target_count = 0;
  CHECK_THROWS_AS(rfe_select(d, cfg), ContractError);
}

TEST_CASE("kNN and set-level vote") {
  const auto d = blobs(3, 12, 4, 6.0, 12);
  SUBCASE("k = 1 recalls its own training set") {
    const auto m = train_knn(d, 1);
    CHECK(top_n_accuracy(m, d, 1) == 1.0);
  }
  SUBCASE("all queries from one model give confidence 1 - 1/#models") {
    const auto m = train_knn(d, 10);
    std::vector<FeatureVector> q;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == "b") q.push_back(d.vectors[i]);
    }
    const auto r = predict_mode(m, q);
    CHECK(r.label == "b");
    CHECK(r.confidence == doctest::Approx(1.0 - 1.0 / 3.0));
  }
  SUBCASE("uniform votes over four labels give zero confidence") {
    const auto d4 = blobs(4, 5, 3, 10.0, 13);
    const auto m = train_knn(d4, 1);
    std::vector<FeatureVector> q;
    for (std::size_t i = 0; i < 4; ++i) q.push_back(d4.vectors[i]);
    const auto r = predict_mode(m, q);
    CHECK(r.confidence == doctest::Approx(0.0));
  }
  SUBCASE("a single-model database is always that model with zero confidence") {
    LabeledDataset one;
    for (int i = 0; i < 5; ++i) one.add(fv({static_cast<double>(i)}), "only");
    const auto m = train_knn(one, 3);
    const auto r = predict_mode(m, {fv({100.0}), fv({-3.0})});
    CHECK(r.label == "only");
    CHECK(r.confidence == 0.0);
  }
  SUBCASE("contracts") {
    CHECK_THROWS_AS(train_knn(d, 1000), ContractError);
    const auto m = train_knn(d, 3);
    CHECK_THROWS_AS(predict_mode(m, {}), ContractError);
  }
  SUBCASE("ties go to the nearest neighbour's label") {
    LabeledDataset t;
    t.add(fv({0.0}), "far");
    t.add(fv({0.9}), "near");
    t.add(fv({5.0}), "near");
    t.add(fv({-5.0}), "far");
    const auto m = train_knn(t, 4);
    // Standardization is monotone per feature, so distances keep their order.
    CHECK(knn_predict_label(m, std::vector<double>{1.0}) == "near");
    CHECK(knn_predict_label(m, std::vector<double>{-0.1}) == "far");
  }
}

TEST_CASE("grid search") {
  const auto d = blobs(4, 10, 5, 4.0, 14);
  SUBCASE("single point is returned as is") {
    const auto r = grid_search(ClassifierKind::kLogisticRegression, d, {{{"l2", 0.5}}}, 5, 1);
    CHECK(r.best.at("l2") == 0.5);
  }
  SUBCASE("crippling regularization loses") {
    const auto r = grid_search(ClassifierKind::kLogisticRegression, d, {{{"l2", 1e6}}, {{"l2", 1e-2}}}, 5, 1);
    CHECK(r.best.at("l2") == 1e-2);
    CHECK(r.scores[1] > r.scores[0]);
    const auto again = grid_search(ClassifierKind::kLogisticRegression, d, {{{"l2", 1e6}}, {{"l2", 1e-2}}}, 5, 1);
    CHECK(again.scores == r.scores);
  }
  CHECK_THROWS_AS(grid_search(ClassifierKind::kLogisticRegression, d, {}, 5, 1), ContractError);
}

TEST_CASE("model JSON preserves predictions") {
  const auto d = blobs(4, 8, 6, 2.0, 15);
  for (auto kind : {ClassifierKind::kLogisticRegression, ClassifierKind::kLinearSvm, ClassifierKind::kLda,
                    ClassifierKind::kRandomForest, ClassifierKind::kKnn}) {
    const auto m = train_classifier(kind, d, {{"k", 3}}, {0, 2, 3, 5});
    const auto back = classifier_from_json(nlohmann::json::parse(to_json(m).dump()));
    for (const auto& v : d.vectors) {
      const Eigen::VectorXd a = m.predict_proba(v.values), b = back.predict_proba(v.values);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("alternative classifiers learn separable blobs") {
  const auto d = blobs(5, 20, 6, 5.0, 16);
  const auto splits = stratified_kfold(d.labels, 4, 2);
  for (auto kind : {ClassifierKind::kLinearSvm, ClassifierKind::kLda, ClassifierKind::kRandomForest, ClassifierKind::kKnn}) {
    const auto m = train_classifier(kind, d.subset(splits[0].train), {{"k", 5}});
    CHECK(top_n_accuracy(m, d.subset(splits[0].test), 1) >= 0.8);
  }
}
