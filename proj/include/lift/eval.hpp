#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lift/data.hpp"

namespace lift::eval {

double rae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Classification figures are percentages, regression figures raw.
struct MetricReport {
  TaskKind task = TaskKind::classification;
  std::optional<double> accuracy;
  std::optional<double> rmse;
  std::optional<double> rae;
  std::optional<double> f1;
  std::optional<double> precision;
  std::optional<double> recall;
  double invalid_rate = 0.0;
  std::size_t fallback_count = 0;
  std::size_t n = 0;

  void set_fallbacks(std::size_t count);
  nlohmann::ordered_json to_json() const;
};

MetricReport regression_metrics(std::span<const double> pred, std::span<const double> truth);

/// `universe` defaults to the distinct truth labels; a prediction outside it
/// is an error unless it equals `fallback`. Precision, recall and F1 are
/// computed when `positive` is given (two-class universe only); an empty
/// positive prediction set gives precision 0, likewise recall and F1.
MetricReport classification_metrics(std::span<const std::string> pred, std::span<const std::string> truth,
                                     const std::optional<std::string>& positive = std::nullopt,
                                     std::span<const std::string> universe = {},
                                     const std::optional<std::string>& fallback = std::nullopt);

double boundary_similarity(std::span<const std::string> a, std::span<const std::string> b);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_prediction = 0.0;
  // sqrt of the mean per-input sample variance
  double predicted_std = 0.0;
  // root mean square of the known noise level over the bin's inputs
  std::optional<double> reference_std;
};

struct CalibrationOptions {
  std::size_t repeats = 20;
  std::size_t bins = 10;
  std::optional<double> lo;  // default: min of the inputs
  std::optional<double> hi;  // default: max of the inputs
  std::function<double(double)> reference_sigma;
};

/// sampler(x, r) returns the r-th repeated prediction at input x.
using RepeatedSampler = std::function<double(double x, std::size_t repeat)>;

std::vector<CalibrationBin> calibration_profile(const RepeatedSampler& sampler, std::span<const double> xs,
                                                const CalibrationOptions& options);

void write_calibration_csv(std::ostream& out, std::span<const CalibrationBin> bins);

}  // namespace lift::eval
