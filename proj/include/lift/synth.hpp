#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lift/data.hpp"

namespace lift::synth {

enum class FunctionKind { linear, quadratic, exponential, cosine, l1norm, piecewise };

std::string_view to_string(FunctionKind kind);
FunctionKind parse_function_kind(std::string_view text);
const std::vector<FunctionKind>& all_function_kinds();

/// Per-coordinate piecewise map: x-1 on [-10,-3), 0 on [-3,3), x+1 on [3,10].
double piecewise_coordinate(double x);

/// Raw f(x), or its affine rescaling from the analytic range over
/// [-10,10]^p onto [-9,9] when `normalize` is set.
double eval_function(FunctionKind kind, std::span<const double> x, bool normalize = true);

/// Analytic [min, max] of the raw form over [-10,10]^p (independent of p
/// because every family averages a per-coordinate term).
std::pair<double, double> raw_range(FunctionKind kind);

struct RegressionGenSpec {
  FunctionKind kind = FunctionKind::linear;
  std::size_t p = 1;
  std::size_t n = 0;
  double sigma = 0.1;
  double low = -10.0;
  double high = 10.0;
  bool normalize = true;
  std::uint64_t seed = 0;
};

TabularDataset gen_regression(const RegressionGenSpec& spec);

/// Noise std used by the calibration data: (x + 10) / 10.
double heteroscedastic_sigma(double x);

/// 1-D data on [-10,10] with y = f(x) + N(0, sigma(x)^2), f normalized.
TabularDataset gen_heteroscedastic(FunctionKind kind, std::size_t n, std::uint64_t seed);

enum class Shape { blobs, circles, two_circles, moons, nine_clusters };

std::string_view to_string(Shape shape);
Shape parse_shape(std::string_view text);
std::size_t class_count(Shape shape);

struct ClassShapeSpec {
  Shape shape = Shape::blobs;
  std::size_t n = 0;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// p = 2 datasets with labels "0".."c-1"; class sizes differ by at most one.
TabularDataset gen_classification(const ClassShapeSpec& spec);

struct PretextSpec {
  std::size_t p = 1;
  TaskKind task = TaskKind::classification;
  std::vector<std::string> labels;  // classification
  double target_low = -9.0;         // regression response range
  double target_high = 9.0;
  double box_low = -10.0;           // cluster-center bounding box
  double box_high = 10.0;
  double cluster_std = 1.0;
  std::size_t per_cluster = 100;
  std::size_t regression_n = 500;
  std::uint64_t seed = 0;
};

/// Gaussian clusters (one per label) or Gaussian features with uniform
/// responses, sharing the target task's feature count and label space.
TabularDataset gen_pretext(const PretextSpec& spec);

/// Evenly spaced points on [low,high]^p. For p = 2, `count` is the total
/// and must be a perfect square.
FeatureMatrix gen_grid(std::size_t p, double low, double high, std::size_t count);

}  // namespace lift::synth
