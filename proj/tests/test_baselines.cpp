#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "lift/baselines.hpp"
#include "lift/synth.hpp"
#include "support.hpp"

namespace lift::baselines {
namespace {

const std::filesystem::path kReference = std::filesystem::path(LIFT_SOURCE_DIR) / "data" / "reference_results.csv";

FeatureSchema schema_p(std::size_t p) {
  FeatureSchema s;
  s.p = p;
  return s;
}

Hyperparameters raw_knn(std::size_t k, double power, Aggregator agg = Aggregator::mean) {
  Hyperparameters hp;
  hp.k = k;
  hp.minkowski_p = power;
  hp.aggregator = agg;
  hp.standardize = false;
  return hp;
}

// Full sort of all training rows by (distance, index).
std::vector<std::size_t> oracle_order(const FeatureMatrix& train, const FeatureRow& q, double power) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < train.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += std::pow(std::abs(train[i][j] - q[j]), power);
    d.emplace_back(s, i);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (const auto& [dist, i] : d) out.push_back(i);
  return out;
}

std::string oracle_vote(const TabularDataset& train, const std::vector<std::size_t>& nn) {
  std::map<std::string, std::size_t> votes;
  for (auto i : nn) ++votes[train.label(i)];
  std::size_t top = 0;
  for (const auto& [l, v] : votes) top = std::max(top, v);
  for (auto i : nn) {
    if (votes[train.label(i)] == top) return train.label(i);
  }
  return {};
}

TEST(Mcc, MajorityAndTies) {
  const TabularDataset ds(schema_p(1), {{0}, {1}, {2}}, {std::string("a"), std::string("a"), std::string("b")},
                          TaskKind::classification);
  const auto m = fit(BaselineKind::mcc, {}, ds);
  EXPECT_EQ(m.majority(), "a");
  EXPECT_EQ(std::get<std::string>(m.predict_one(std::vector<double>{9})), "a");
  const TabularDataset tie(schema_p(1), {{0}, {1}}, {std::string("b"), std::string("a")}, TaskKind::classification);
  EXPECT_EQ(fit(BaselineKind::mcc, {}, tie).majority(), "a");
}

TEST(Mcc, TestAccuracyEqualsMajorityFrequency) {
  // 68.18% majority, as on the Customers test split (90 of 132).
  FeatureMatrix rows;
  std::vector<Target> targets;
  for (int i = 0; i < 132; ++i) {
    rows.push_back({static_cast<double>(i)});
    targets.emplace_back(std::string(i < 90 ? "1" : "2"));
  }
  const TabularDataset test(schema_p(1), rows, targets, TaskKind::classification);
  const auto m = fit(BaselineKind::mcc, {}, test);
  const auto pred = m.predict(test.rows());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.targets()[i];
  EXPECT_NEAR(100.0 * static_cast<double>(correct) / 132.0, 68.18, 0.005);
}

TEST(Fit, Errors) {
  const TabularDataset reg(schema_p(1), {{0}}, {1.0}, TaskKind::regression);
  EXPECT_LIFT_ERROR(fit(BaselineKind::mcc, {}, reg), ErrorCode::wrong_task);
  EXPECT_LIFT_ERROR(fit(BaselineKind::linear, {}, reg.subset({})), ErrorCode::empty_training_set);
  const auto m = fit(BaselineKind::linear, {}, reg);
  EXPECT_LIFT_ERROR(m.predict_one(std::vector<double>{1, 2}), ErrorCode::dimension_mismatch);
  Hyperparameters bad;
  bad.k = 0;
  EXPECT_LIFT_ERROR(fit(BaselineKind::knn_regressor, bad, reg), ErrorCode::invalid_argument);
}

TEST(Knn, OneNnReproducesTrainingTargets) {
  Rng rng = make_rng(1);
  const auto ds = testing::random_classification(rng, 40, 3, 4);
  const auto m = fit(BaselineKind::knn_classifier, raw_knn(1, 2), ds);
  EXPECT_EQ(m.predict(ds.rows()), ds.targets());
  const auto reg = testing::random_regression(rng, 40, 3);
  EXPECT_EQ(fit(BaselineKind::knn_regressor, raw_knn(1, 1), reg).predict(reg.rows()), reg.targets());
}

TEST(Knn, MedianIgnoresOutlier) {
  const TabularDataset ds(schema_p(1), {{0}, {1}, {2}, {50}}, {1.0, 2.0, 100.0, -7.0}, TaskKind::regression);
  const auto m = fit(BaselineKind::knn_regressor, raw_knn(3, 2, Aggregator::median), ds);
  EXPECT_EQ(std::get<double>(m.predict_one(std::vector<double>{1})), 2.0);
  const auto mean = fit(BaselineKind::knn_regressor, raw_knn(3, 2), ds);
  EXPECT_NEAR(std::get<double>(mean.predict_one(std::vector<double>{1})), 103.0 / 3.0, 1e-12);
  const auto even = fit(BaselineKind::knn_regressor, raw_knn(4, 2, Aggregator::median), ds);
  EXPECT_EQ(std::get<double>(even.predict_one(std::vector<double>{1})), 1.5);
}

TEST(Knn, KEqualsNGivesGlobalMean) {
  Rng rng = make_rng(2);
  const auto ds = testing::random_regression(rng, 25, 2);
  const auto values = ds.values();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / 25.0;
  Hyperparameters hp;
  hp.k = 25;
  const auto m = fit(BaselineKind::knn_regressor, hp, ds);
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> q{testing::uniform(rng, -20, 20), testing::uniform(rng, -20, 20)};
    EXPECT_NEAR(std::get<double>(m.predict_one(q)), mean, 1e-9);
  }
}

TEST(Knn, DistanceTiesGoToLowerIndex) {
  const TabularDataset ds(schema_p(1), {{1}, {-1}, {1}}, {std::string("a"), std::string("b"), std::string("c")},
                          TaskKind::classification);
  const auto m = fit(BaselineKind::knn_classifier, raw_knn(1, 2), ds);
  EXPECT_EQ(m.neighbors(std::vector<double>{0}), std::vector<std::size_t>{0});
  EXPECT_EQ(std::get<std::string>(m.predict_one(std::vector<double>{0})), "a");
}

TEST(Knn, VoteTieGoesToNearestClass) {
  const TabularDataset ds(schema_p(1), {{3}, {1}, {2}, {4}},
                          {std::string("x"), std::string("y"), std::string("x"), std::string("y")},
                          TaskKind::classification);
  const auto m = fit(BaselineKind::knn_classifier, raw_knn(4, 1), ds);
  EXPECT_EQ(std::get<std::string>(m.predict_one(std::vector<double>{0.9})), "y");
  EXPECT_EQ(std::get<std::string>(m.predict_one(std::vector<double>{3.1})), "x");
}

TEST(Knn, MatchesBruteForceOracle) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = testing::uniform_int(rng, 5, 50);
    const std::size_t p = testing::uniform_int(rng, 1, 3);
    // Small integer grid so distance ties are common.
    FeatureMatrix rows;
    std::vector<Target> labels, values;
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRow r;
      for (std::size_t j = 0; j < p; ++j) r.push_back(static_cast<double>(testing::uniform_int(rng, 0, 4)));
      rows.push_back(r);
      labels.emplace_back(std::to_string(testing::uniform_int(rng, 0, 2)));
      values.emplace_back(static_cast<double>(testing::uniform_int(rng, 0, 100)));
    }
    const TabularDataset cls(schema_p(p), rows, labels, TaskKind::classification);
    const TabularDataset reg(schema_p(p), rows, values, TaskKind::regression);
    const std::size_t k = std::vector<std::size_t>{1, 3, 5}[static_cast<std::size_t>(trial) % 3];
    const double power = trial % 2 ? 1.0 : 2.0;
    const auto mc = fit(BaselineKind::knn_classifier, raw_knn(k, power), cls);
    const auto mr = fit(BaselineKind::knn_regressor, raw_knn(k, power), reg);
    const auto mm = fit(BaselineKind::knn_regressor, raw_knn(k, power, Aggregator::median), reg);
    for (int q = 0; q < 10; ++q) {
      FeatureRow query;
      for (std::size_t j = 0; j < p; ++j) query.push_back(static_cast<double>(testing::uniform_int(rng, 0, 4)));
      auto order = oracle_order(rows, query, power);
      order.resize(std::min(k, n));
      ASSERT_EQ(mc.neighbors(query), order);
      EXPECT_EQ(std::get<std::string>(mc.predict_one(query)), oracle_vote(cls, order));
      std::vector<double> nv;
      for (auto i : order) nv.push_back(reg.value(i));
      EXPECT_DOUBLE_EQ(std::get<double>(mr.predict_one(query)),
                       std::accumulate(nv.begin(), nv.end(), 0.0) / static_cast<double>(nv.size()));
      std::sort(nv.begin(), nv.end());
      const double med = nv.size() % 2 ? nv[nv.size() / 2] : 0.5 * (nv[nv.size() / 2 - 1] + nv[nv.size() / 2]);
      EXPECT_EQ(std::get<double>(mm.predict_one(query)), med);
    }
  }
}

TEST(Knn, StandardizedMatchesOracleOnScaledData) {
  Rng rng = make_rng(4);
  const auto ds = testing::random_classification(rng, 30, 2, 3);
  FeatureMatrix scaled = ds.rows();
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0, ss = 0;
    for (const auto& r : ds.rows()) mean += r[j];
    mean /= 30.0;
    for (const auto& r : ds.rows()) ss += (r[j] - mean) * (r[j] - mean);
    const double sd = std::sqrt(ss / 30.0);
    for (auto& r : scaled) r[j] = (r[j] - mean) / sd;
  }
  Hyperparameters hp;
  hp.k = 3;
  const auto m = fit(BaselineKind::knn_classifier, hp, ds);
  // Same rows, so the query maps to itself in standardized space.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto order = oracle_order(scaled, scaled[i], 2.0);
    order.resize(3);
    EXPECT_EQ(m.neighbors(ds.rows()[i]), order);
  }
}

TEST(Linear, RecoversExactWeights) {
  Rng rng = make_rng(5);
  const std::vector<double> w{1.5, -2.0, 0.25};
  const double b = 3.0;
  FeatureMatrix rows;
  std::vector<Target> y;
  for (int i = 0; i < 50; ++i) {
    FeatureRow r{testing::uniform(rng, -10, 10), testing::uniform(rng, 0, 100), testing::uniform(rng, -1, 1)};
    y.emplace_back(b + w[0] * r[0] + w[1] * r[1] + w[2] * r[2]);
    rows.push_back(r);
  }
  const TabularDataset ds(schema_p(3), rows, y, TaskKind::regression);
  for (bool standardize : {true, false}) {
    Hyperparameters hp;
    hp.standardize = standardize;
    const auto m = fit(BaselineKind::linear, hp, ds);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(m.weights()(j), w[static_cast<std::size_t>(j)], 1e-8);
    EXPECT_NEAR(m.bias(), b, 1e-8);
  }
}

TEST(Linear, SingularGramStillSolves) {
  const TabularDataset ds(schema_p(2), {{1, 2}, {2, 4}, {3, 6}}, {1.0, 2.0, 3.0}, TaskKind::regression);
  Hyperparameters hp;
  hp.standardize = false;
  const auto m = fit(BaselineKind::linear, hp, ds);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::get<double>(m.predict_one(ds.rows()[i])), ds.value(i), 1e-4);
  }
}

TEST(Logistic, SeparableBlobs) {
  auto blobs = synth::gen_classification({synth::Shape::blobs, 400, 0.8, 1});
  // Two of the four blobs form a linearly separable binary task.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    if (blobs.label(i) == "0" || blobs.label(i) == "3") keep.push_back(i);
  }
  const auto sub = blobs.subset(keep);
  std::vector<Target> t(sub.targets());
  const TabularDataset ds(sub.schema(), sub.rows(), t, TaskKind::classification);
  Hyperparameters hp;
  hp.iterations = 2000;
  const auto m = fit(BaselineKind::logistic, hp, ds);
  const auto pred = m.predict(ds.rows());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.targets()[i];
  EXPECT_GE(100.0 * static_cast<double>(correct) / static_cast<double>(pred.size()), 99.0);
}

TEST(Logistic, MulticlassAndMonotoneLoss) {
  const auto ds = synth::gen_classification({synth::Shape::blobs, 400, 1.0, 2});
  Hyperparameters hp;
  hp.learning_rate = 1e-3;
  hp.iterations = 500;
  const auto m = fit(BaselineKind::logistic, hp, ds);
  const auto& loss = m.loss_history();
  ASSERT_EQ(loss.size(), 501u);
  EXPECT_NEAR(loss.front(), std::log(4.0), 1e-12);
  for (std::size_t i = 1; i < loss.size(); ++i) EXPECT_LE(loss[i], loss[i - 1]);
  Hyperparameters fast;
  fast.iterations = 1000;
  const auto good = fit(BaselineKind::logistic, fast, ds);
  const auto pred = good.predict(ds.rows());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.targets()[i];
  EXPECT_GE(correct, 390u);
}

TEST(Minkowski, Powers) {
  const std::vector<double> a{0, 0}, b{3, 4};
  EXPECT_EQ(minkowski_pow(a, b, 2.0), 25.0);
  EXPECT_EQ(minkowski_pow(a, b, 1.0), 7.0);
}

TEST(Names, RoundTrip) {
  for (auto k : {BaselineKind::mcc, BaselineKind::knn_classifier, BaselineKind::knn_regressor, BaselineKind::linear,
                 BaselineKind::logistic}) {
    EXPECT_EQ(parse_baseline_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_aggregator("median"), Aggregator::median);
  EXPECT_LIFT_ERROR(parse_baseline_kind("svm"), ErrorCode::invalid_argument);
}

TEST(Reference, BundledTable) {
  const auto refs = load_reference_results(kReference);
  EXPECT_EQ(refs.size(), 220u);
  auto find = [&](const std::string& dataset, const std::string& method) -> const ReferenceResult* {
    for (const auto& r : refs) {
      if (r.dataset == dataset && r.method == method) return &r;
    }
    return nullptr;
  };
  const auto* customers = find("Customers (1511)", "MCC");
  ASSERT_NE(customers, nullptr);
  EXPECT_EQ(customers->mean, 68.18);
  EXPECT_FALSE(customers->std);
  const auto* clusters = find("9Clusters (1)", "LIFT/GPT-3");
  ASSERT_NE(clusters, nullptr);
  EXPECT_EQ(clusters->mean, 100.0);
  EXPECT_EQ(clusters->std, 0.0);
  const auto* gpt3 = find("Customers (1511)", "LIFT/GPT-3");
  ASSERT_NE(gpt3, nullptr);
  EXPECT_EQ(gpt3->mean, 84.85);
  EXPECT_EQ(gpt3->std, 1.42);
  const auto* tae = find("TAE (48)", "MCC");
  ASSERT_NE(tae, nullptr);
  EXPECT_EQ(tae->mean, 35.48);
}

}  // namespace
}  // namespace lift::baselines
