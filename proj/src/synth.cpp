#include "lift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/random.hpp"

namespace lift::synth {

std::string_view to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::linear: return "linear";
    case FunctionKind::quadratic: return "quadratic";
    case FunctionKind::exponential: return "exponential";
    case FunctionKind::cosine: return "cosine";
    case FunctionKind::l1norm: return "l1norm";
    case FunctionKind::piecewise: return "piecewise";
  }
  return "?";
}

FunctionKind parse_function_kind(std::string_view text) {
  for (auto kind : all_function_kinds()) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown function kind '{}'", text));
}

const std::vector<FunctionKind>& all_function_kinds() {
  static const std::vector<FunctionKind> kinds{FunctionKind::linear, FunctionKind::quadratic,
                                               FunctionKind::exponential, FunctionKind::cosine,
                                               FunctionKind::l1norm, FunctionKind::piecewise};
  return kinds;
}

double piecewise_coordinate(double x) {
  if (x < -3.0) return x - 1.0;
  if (x < 3.0) return 0.0;
  return x + 1.0;
}

std::pair<double, double> raw_range(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::linear: return {-10.0, 10.0};
    case FunctionKind::quadratic: return {0.0, 100.0};
    case FunctionKind::exponential: return {std::exp(-2.0), std::exp(2.0)};
    case FunctionKind::cosine: return {-1.0, 1.0};
    case FunctionKind::l1norm: return {0.0, 10.0};
    case FunctionKind::piecewise: return {-11.0, 11.0};
  }
  return {0.0, 1.0};
}

double eval_function(FunctionKind kind, std::span<const double> x, bool normalize) {
  if (x.empty()) throw Error(ErrorCode::invalid_argument, "eval_function needs p >= 1");
  double sum = 0.0;
  for (double xi : x) {
    switch (kind) {
      case FunctionKind::linear: sum += xi; break;
      case FunctionKind::quadratic: sum += xi * xi; break;
      case FunctionKind::exponential: sum += std::exp(0.2 * xi); break;
      case FunctionKind::cosine: sum += std::cos(0.5 * std::numbers::pi * xi); break;
      case FunctionKind::l1norm: sum += std::abs(xi); break;
      case FunctionKind::piecewise: sum += piecewise_coordinate(xi); break;
    }
  }
  const double raw = sum / static_cast<double>(x.size());
  if (!normalize) return raw;
  const auto [lo, hi] = raw_range(kind);
  return -9.0 + 18.0 * (raw - lo) / (hi - lo);
}

TabularDataset gen_regression(const RegressionGenSpec& spec) {
  if (!(spec.low < spec.high)) throw Error(ErrorCode::invalid_argument, "low must be < high");
  if (spec.sigma < 0.0) throw Error(ErrorCode::invalid_argument, "sigma must be >= 0");
  if (spec.p == 0) throw Error(ErrorCode::invalid_argument, "p must be >= 1");
  Rng rng = make_rng(spec.seed);
  std::uniform_real_distribution<double> coord(spec.low, spec.high);
  std::normal_distribution<double> noise(0.0, 1.0);

  FeatureMatrix rows;
  std::vector<Target> targets;
  rows.reserve(spec.n);
  targets.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    FeatureRow x(spec.p);
    for (auto& xi : x) xi = coord(rng);
    const double eps = noise(rng);
    targets.emplace_back(eval_function(spec.kind, x, spec.normalize) + spec.sigma * eps);
    rows.push_back(std::move(x));
  }
  FeatureSchema schema{spec.p, {}, "y"};
  return TabularDataset(schema, std::move(rows), std::move(targets), TaskKind::regression);
}

double heteroscedastic_sigma(double x) { return (x + 10.0) / 10.0; }

TabularDataset gen_heteroscedastic(FunctionKind kind, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix rows;
  std::vector<Target> targets;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = coord(rng);
    const double eps = noise(rng);
    const double fx = eval_function(kind, std::span<const double>(&x, 1), true);
    targets.emplace_back(fx + heteroscedastic_sigma(x) * eps);
    rows.push_back({x});
  }
  return TabularDataset(FeatureSchema{1, {}, "y"}, std::move(rows), std::move(targets), TaskKind::regression);
}

// ---------------------------------------------------------------------------
// Classification shapes

std::string_view to_string(Shape shape) {
  switch (shape) {
    case Shape::blobs: return "blobs";
    case Shape::circles: return "circles";
    case Shape::two_circles: return "two_circles";
    case Shape::moons: return "moons";
    case Shape::nine_clusters: return "nine_clusters";
  }
  return "?";
}

Shape parse_shape(std::string_view text) {
  for (auto s : {Shape::blobs, Shape::circles, Shape::two_circles, Shape::moons, Shape::nine_clusters}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown shape '{}'", text));
}

std::size_t class_count(Shape shape) {
  switch (shape) {
    case Shape::blobs: return 4;
    case Shape::circles: return 2;
    case Shape::two_circles: return 2;
    case Shape::moons: return 2;
    case Shape::nine_clusters: return 9;
  }
  return 0;
}

namespace {

// Noise-free point of class `k` for a shape; `u` is a uniform draw in [0,1).
FeatureRow shape_point(Shape shape, std::size_t k, double u) {
  constexpr double pi = std::numbers::pi;
  switch (shape) {
    case Shape::blobs: {
      static constexpr double centers[4][2] = {{-5, -5}, {5, -5}, {-5, 5}, {5, 5}};
      return {centers[k][0], centers[k][1]};
    }
    case Shape::nine_clusters: {
      const double cx = -6.0 + 6.0 * static_cast<double>(k % 3);
      const double cy = -6.0 + 6.0 * static_cast<double>(k / 3);
      return {cx, cy};
    }
    case Shape::circles: {
      const double r = k == 0 ? 1.0 : 0.5;
      const double t = 2.0 * pi * u;
      return {r * std::cos(t), r * std::sin(t)};
    }
    case Shape::two_circles: {
      // Two concentric pairs side by side; u picks the pair.
      const double offset = u < 0.5 ? -1.5 : 1.5;
      const double t = 2.0 * pi * (u < 0.5 ? 2.0 * u : 2.0 * u - 1.0);
      const double r = k == 0 ? 1.0 : 0.5;
      return {offset + r * std::cos(t), r * std::sin(t)};
    }
    case Shape::moons: {
      const double t = pi * u;
      if (k == 0) return {std::cos(t), std::sin(t)};
      return {1.0 - std::cos(t), 0.5 - std::sin(t)};
    }
  }
  return {0.0, 0.0};
}

}  // namespace

TabularDataset gen_classification(const ClassShapeSpec& spec) {
  if (spec.noise < 0.0) throw Error(ErrorCode::invalid_argument, "noise must be >= 0");
  const std::size_t c = class_count(spec.shape);
  Rng rng = make_rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  FeatureMatrix rows;
  std::vector<Target> targets;
  rows.reserve(spec.n);
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t count = spec.n / c + (k < spec.n % c ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      FeatureRow x = shape_point(spec.shape, k, unit(rng));
      for (auto& xi : x) xi += spec.noise * gauss(rng);
      rows.push_back(std::move(x));
      targets.emplace_back(std::to_string(k));
    }
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::string> label_set;
  for (std::size_t k = 0; k < c; ++k) label_set.push_back(std::to_string(k));
  TabularDataset ordered(FeatureSchema{2, {}, "y"}, std::move(rows), std::move(targets),
                         TaskKind::classification, label_set);
  return ordered.subset(order);
}

TabularDataset gen_pretext(const PretextSpec& spec) {
  if (spec.p == 0) throw Error(ErrorCode::invalid_argument, "pretext needs p >= 1");
  if (!(spec.box_low < spec.box_high)) throw Error(ErrorCode::invalid_argument, "empty bounding box");
  Rng rng = make_rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureMatrix rows;
  std::vector<Target> targets;

  if (spec.task == TaskKind::classification) {
    if (spec.labels.empty()) throw Error(ErrorCode::invalid_argument, "pretext needs a label set");
    std::uniform_real_distribution<double> coord(spec.box_low, spec.box_high);
    const double min_sep = 2.0 * spec.cluster_std;
    std::vector<FeatureRow> centers;
    for (std::size_t k = 0; k < spec.labels.size(); ++k) {
      FeatureRow best;
      // Rejection sampling; after the cap the last draw is kept (crowded boxes).
      for (int attempt = 0; attempt < 1000; ++attempt) {
        FeatureRow cand(spec.p);
        for (auto& v : cand) v = coord(rng);
        best = cand;
        const bool ok = std::all_of(centers.begin(), centers.end(), [&](const FeatureRow& c) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < spec.p; ++j) d2 += (c[j] - cand[j]) * (c[j] - cand[j]);
          return std::sqrt(d2) >= min_sep;
        });
        if (ok) break;
      }
      centers.push_back(std::move(best));
    }
    for (std::size_t k = 0; k < spec.labels.size(); ++k) {
      for (std::size_t i = 0; i < spec.per_cluster; ++i) {
        FeatureRow x(spec.p);
        for (std::size_t j = 0; j < spec.p; ++j) x[j] = centers[k][j] + spec.cluster_std * gauss(rng);
        rows.push_back(std::move(x));
        targets.emplace_back(spec.labels[k]);
      }
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    TabularDataset ds(FeatureSchema{spec.p, {}, "y"}, std::move(rows), std::move(targets),
                      TaskKind::classification, spec.labels);
    return ds.subset(order);
  }

  if (!(spec.target_low < spec.target_high)) throw Error(ErrorCode::invalid_argument, "empty response range");
  const double mid = 0.5 * (spec.box_low + spec.box_high);
  const double spread = (spec.box_high - spec.box_low) / 6.0;
  std::uniform_real_distribution<double> response(spec.target_low, spec.target_high);
  for (std::size_t i = 0; i < spec.regression_n; ++i) {
    FeatureRow x(spec.p);
    for (auto& v : x) v = mid + spread * gauss(rng);
    double y = response(rng);
    while (y <= spec.target_low) y = response(rng);
    rows.push_back(std::move(x));
    targets.emplace_back(y);
  }
  return TabularDataset(FeatureSchema{spec.p, {}, "y"}, std::move(rows), std::move(targets), TaskKind::regression);
}

FeatureMatrix gen_grid(std::size_t p, double low, double high, std::size_t count) {
  if (p == 0 || p > 2) throw Error(ErrorCode::unsupported_dim, fmt::format("grid of dimension {}", p));
  if (!(low < high)) throw Error(ErrorCode::invalid_argument, "grid needs low < high");

  auto axis = [&](std::size_t m) {
    std::vector<double> values(m);
    for (std::size_t i = 0; i < m; ++i) {
      values[i] = low + (high - low) * static_cast<double>(i) / static_cast<double>(m - 1);
    }
    values.back() = high;
    return values;
  };

  FeatureMatrix out;
  if (p == 1) {
    if (count < 2) throw Error(ErrorCode::invalid_argument, "grid needs at least 2 points");
    for (double v : axis(count)) out.push_back({v});
    return out;
  }
  const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count))));
  if (m * m != count || m < 2) {
    throw Error(ErrorCode::invalid_argument, fmt::format("2-D grid total {} is not a square >= 4", count));
  }
  const auto values = axis(m);
  for (double a : values) {
    for (double b : values) out.push_back({a, b});
  }
  return out;
}

}  // namespace lift::synth
