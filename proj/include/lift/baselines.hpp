#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lift/data.hpp"

namespace lift::baselines {

enum class BaselineKind { mcc, knn_classifier, knn_regressor, linear, logistic };
enum class Aggregator { mean, median };

std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(std::string_view text);
std::string_view to_string(Aggregator agg);
Aggregator parse_aggregator(std::string_view text);

struct Hyperparameters {
  std::size_t k = 5;
  double minkowski_p = 2.0;
  Aggregator aggregator = Aggregator::mean;
  double learning_rate = 0.1;
  std::size_t iterations = 1000;
  // z-score features on training statistics (linear, logistic, kNN)
  bool standardize = true;

  void validate() const;
};

/// Immutable fitted model; predict is pure.
class FittedBaseline {
 public:
  BaselineKind kind() const { return kind_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  TaskKind task() const;
  std::size_t p() const { return p_; }

  std::vector<Target> predict(const FeatureMatrix& x) const;
  Target predict_one(std::span<const double> x) const;

  // mcc
  const std::string& majority() const { return majority_; }
  // linear: weights and bias in the original feature space
  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  // logistic: cross-entropy before each step and after the last
  const std::vector<double>& loss_history() const { return loss_history_; }

  /// Indices of the k nearest training rows, nearest first, ties by index.
  std::vector<std::size_t> neighbors(std::span<const double> x) const;

 private:
  friend FittedBaseline fit(BaselineKind, const Hyperparameters&, const TabularDataset&);

  std::vector<double> transform(std::span<const double> x) const;

  BaselineKind kind_ = BaselineKind::mcc;
  Hyperparameters hp_;
  std::size_t p_ = 0;
  std::vector<double> shift_;
  std::vector<double> scale_;
  std::string majority_;
  std::vector<std::string> labels_;
  // kNN
  FeatureMatrix train_x_;
  std::vector<Target> train_y_;
  // linear
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  // logistic, in standardized space: classes x (p + 1), bias last
  Eigen::MatrixXd coef_;
  std::vector<double> loss_history_;
};

FittedBaseline fit(BaselineKind kind, const Hyperparameters& hp, const TabularDataset& train);

/// Minkowski distance raised to the power p (monotone in the distance).
double minkowski_pow(std::span<const double> a, std::span<const double> b, double power);

/// Published accuracies bundled for report rendering.
struct ReferenceResult {
  std::string dataset;
  std::string method;
  double mean = 0.0;
  std::optional<double> std;
};

std::vector<ReferenceResult> load_reference_results(const std::filesystem::path& csv);

}  // namespace lift::baselines
