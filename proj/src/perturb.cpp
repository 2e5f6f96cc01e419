#include "lift/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/random.hpp"

namespace lift::perturb {

namespace {

void check_fraction(double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, fmt::format("fraction {} outside [0, 1]", fraction));
  }
}

void require_classification(const TabularDataset& ds, std::string_view op) {
  if (ds.task() != TaskKind::classification) {
    throw Error(ErrorCode::wrong_task, fmt::format("{} needs a classification dataset", op));
  }
}

std::size_t label_index(const TabularDataset& ds, const std::string& label) {
  const auto& set = ds.label_set();
  return static_cast<std::size_t>(std::find(set.begin(), set.end(), label) - set.begin());
}

}  // namespace

std::vector<std::size_t> select_rows(std::size_t n, double fraction, std::uint64_t seed) {
  check_fraction(fraction);
  const std::size_t k = std::min(n, round_half_up(fraction * static_cast<double>(n)));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto rng = make_rng(seed, 1);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

TabularDataset corrupt_labels_random(const TabularDataset& ds, double fraction, std::uint64_t seed) {
  require_classification(ds, "corrupt_labels_random");
  const auto& set = ds.label_set();
  if (set.size() < 2) throw Error(ErrorCode::invalid_argument, "label corruption needs at least two labels");
  const auto rows = select_rows(ds.size(), fraction, seed);
  auto targets = ds.targets();
  auto rng = make_rng(seed, 2);
  std::uniform_int_distribution<std::size_t> other(0, set.size() - 2);
  for (std::size_t i : rows) {
    const std::size_t cur = label_index(ds, ds.label(i));
    std::size_t j = other(rng);
    if (j >= cur) ++j;
    targets[i] = set[j];
  }
  return ds.with_targets(std::move(targets));
}

TabularDataset shift_labels(const TabularDataset& ds, const std::vector<std::size_t>& indices, long steps) {
  require_classification(ds, "shift_labels");
  const auto& set = ds.label_set();
  const long c = static_cast<long>(set.size());
  if (c == 0) return ds;
  auto targets = ds.targets();
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw Error(ErrorCode::out_of_range, fmt::format("row {} out of range", i));
    const long cur = static_cast<long>(label_index(ds, ds.label(i)));
    targets[i] = set[static_cast<std::size_t>(((cur + steps) % c + c) % c)];
  }
  return ds.with_targets(std::move(targets));
}

TabularDataset corrupt_labels_systematic(const TabularDataset& ds, double fraction, std::uint64_t seed) {
  require_classification(ds, "corrupt_labels_systematic");
  return shift_labels(ds, select_rows(ds.size(), fraction, seed), 1);
}

TabularDataset inject_outliers(const TabularDataset& ds, double fraction, std::uint64_t seed) {
  if (ds.task() != TaskKind::regression) {
    throw Error(ErrorCode::wrong_task, "inject_outliers needs a regression dataset");
  }
  check_fraction(fraction);
  const auto y = ds.values();
  if (y.size() < 2) throw Error(ErrorCode::degenerate_targets, "outlier injection needs at least two targets");
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw Error(ErrorCode::degenerate_targets, "target standard deviation is zero");
  const auto [min_it, max_it] = std::minmax_element(y.begin(), y.end());
  const double lo = *min_it;
  const double hi = *max_it;

  const auto rows = select_rows(ds.size(), fraction, seed);
  auto targets = ds.targets();
  auto rng = make_rng(seed, 3);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i : rows) {
    const bool up = coin(rng);
    // Distance from the mean: the [3, 6] sd window, but never inside the
    // data. Heavy tails can reach past 6 sd; then take 3 sd beyond the edge.
    const double edge = up ? hi - mean : mean - lo;
    double a = std::max(3.0 * sd, edge);
    double b = 6.0 * sd;
    if (a >= b) b = a + 3.0 * sd;
    std::uniform_real_distribution<double> dist(a, b);
    double v;
    do v = up ? mean + dist(rng) : mean - dist(rng);
    while (!(v > hi || v < lo));
    targets[i] = v;
  }
  return ds.with_targets(std::move(targets));
}

std::string_view to_string(NoiseKind kind) {
  return kind == NoiseKind::gaussian_linf ? "gaussian_linf" : "signed_constant";
}

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "gaussian_linf" || text == "gaussian") return NoiseKind::gaussian_linf;
  if (text == "signed_constant") return NoiseKind::signed_constant;
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown noise kind '{}'", text));
}

void NoiseSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::invalid_argument, "noise epsilon must be finite and >= 0");
  }
}

FeatureMatrix sample_noise(std::size_t n, std::size_t p, const NoiseSpec& spec) {
  spec.validate();
  FeatureMatrix out(n, FeatureRow(p, 0.0));
  auto rng = make_rng(spec.seed, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (auto& row : out) {
    if (spec.kind == NoiseKind::signed_constant) {
      for (double& d : row) d = coin(rng) ? spec.epsilon : -spec.epsilon;
      continue;
    }
    double peak = 0.0;
    for (double& d : row) {
      d = normal(rng);
      peak = std::max(peak, std::abs(d));
    }
    if (peak == 0.0) continue;
    // Divide first so the peak coordinate maps to exactly +-epsilon.
    for (double& d : row) d = spec.epsilon * (d / peak);
  }
  return out;
}

FeatureMatrix perturb_features(const FeatureMatrix& x, const NoiseSpec& spec) {
  const std::size_t p = x.empty() ? 0 : x.front().size();
  for (const auto& row : x) {
    if (row.size() != p) throw Error(ErrorCode::dimension_mismatch, "ragged feature matrix");
  }
  const auto noise = sample_noise(x.size(), p, spec);
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) out[i][j] += noise[i][j];
  }
  return out;
}

TabularDataset perturb_features(const TabularDataset& ds, const NoiseSpec& spec) {
  return ds.with_rows(perturb_features(ds.rows(), spec));
}

TabularDataset augment_gaussian(const TabularDataset& ds, double epsilon, std::size_t copies,
                                std::optional<std::pair<double, double>> clamp, std::uint64_t seed) {
  if (copies < 1) throw Error(ErrorCode::invalid_argument, "augmentation needs copies >= 1");
  if (clamp && clamp->first > clamp->second) throw Error(ErrorCode::invalid_argument, "clamp range is inverted");
  FeatureMatrix rows = ds.rows();
  std::vector<Target> targets = ds.targets();
  rows.reserve(ds.size() * (copies + 1));
  targets.reserve(ds.size() * (copies + 1));
  for (std::size_t c = 0; c < copies; ++c) {
    NoiseSpec spec{NoiseKind::gaussian_linf, epsilon, mix_seed(seed, c)};
    auto noisy = perturb_features(ds.rows(), spec);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      if (clamp) {
        for (double& v : noisy[i]) v = std::clamp(v, clamp->first, clamp->second);
      }
      rows.push_back(std::move(noisy[i]));
      targets.push_back(ds.targets()[i]);
    }
  }
  return TabularDataset(ds.schema(), std::move(rows), std::move(targets), ds.task(), ds.label_set());
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> ridge_augment(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                          double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (x.rows() != y.size()) throw Error(ErrorCode::dimension_mismatch, "X and y row counts differ");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd xa(n + p, p);
  xa.topRows(n) = x;
  xa.bottomRows(p) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd ya = Eigen::VectorXd::Zero(n + p);
  ya.head(n) = y;
  return {std::move(xa), std::move(ya)};
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::dimension_mismatch, "X and y row counts differ");
  return x.colPivHouseholderQr().solve(y);
}

}  // namespace lift::perturb
