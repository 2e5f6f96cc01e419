#include "lift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "lift/error.hpp"

namespace lift::eval {

namespace {

template <class A, class B>
void check_lengths(const A& a, const B& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::length_mismatch, fmt::format("length mismatch: {} vs {}", a.size(), b.size()));
  }
  if (a.empty()) throw Error(ErrorCode::invalid_argument, "metrics need at least one sample");
}

}  // namespace

double rae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += std::abs(pred[i] - truth[i]);
    den += std::abs(mean - truth[i]);
  }
  if (den == 0.0) throw Error(ErrorCode::constant_truth, "RAE is undefined for constant truth");
  return num / den;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

void MetricReport::set_fallbacks(std::size_t count) {
  fallback_count = count;
  invalid_rate = n == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(n);
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = std::string(to_string(task));
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("accuracy", accuracy);
  put("rmse", rmse);
  put("rae", rae);
  put("f1", f1);
  put("precision", precision);
  put("recall", recall);
  j["invalid_rate"] = invalid_rate;
  j["fallback_count"] = fallback_count;
  j["n"] = n;
  return j;
}

MetricReport regression_metrics(std::span<const double> pred, std::span<const double> truth) {
  MetricReport r;
  r.task = TaskKind::regression;
  r.n = truth.size();
  r.rmse = eval::rmse(pred, truth);
  r.rae = eval::rae(pred, truth);
  return r;
}

MetricReport classification_metrics(std::span<const std::string> pred, std::span<const std::string> truth,
                                     const std::optional<std::string>& positive,
                                     std::span<const std::string> universe,
                                     const std::optional<std::string>& fallback) {
  check_lengths(pred, truth);
  std::set<std::string> labels(universe.begin(), universe.end());
  if (labels.empty()) labels.insert(truth.begin(), truth.end());
  for (const auto& p : pred) {
    if (!labels.contains(p) && p != fallback) {
      throw Error(ErrorCode::unknown_label, fmt::format("prediction '{}' is not a known label", p));
    }
  }

  MetricReport r;
  r.task = TaskKind::classification;
  r.n = truth.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  r.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(r.n);

  if (positive) {
    if (labels.size() != 2 || !labels.contains(*positive)) {
      throw Error(ErrorCode::invalid_argument, "binary metrics need two labels including the positive one");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool pp = pred[i] == *positive;
      const bool tt = truth[i] == *positive;
      tp += pp && tt;
      fp += pp && !tt;
      fn += !pp && tt;
    }
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.precision = 100.0 * precision;
    r.recall = 100.0 * recall;
    r.f1 = precision + recall == 0.0 ? 0.0 : 100.0 * 2.0 * precision * recall / (precision + recall);
  }
  return r;
}

double boundary_similarity(std::span<const std::string> a, std::span<const std::string> b) {
  check_lengths(a, b);
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return 100.0 * static_cast<double>(same) / static_cast<double>(a.size());
}

std::vector<CalibrationBin> calibration_profile(const RepeatedSampler& sampler, std::span<const double> xs,
                                                const CalibrationOptions& options) {
  if (options.repeats < 2) throw Error(ErrorCode::invalid_argument, "calibration needs at least two repeats");
  if (options.bins < 1) throw Error(ErrorCode::invalid_argument, "calibration needs at least one bin");
  if (xs.empty()) return {};
  const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  const double lo = options.lo.value_or(*mn);
  const double hi = options.hi.value_or(*mx);
  if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "calibration range is empty");
  const double width = (hi - lo) / static_cast<double>(options.bins);

  struct Acc {
    double var_sum = 0.0;
    double mean_sum = 0.0;
    double ref_sq = 0.0;
    std::size_t count = 0;
  };
  std::vector<Acc> acc(options.bins);
  for (double x : xs) {
    if (x < lo || x > hi) continue;
    const auto b = std::min(options.bins - 1, static_cast<std::size_t>((x - lo) / width));
    // Welford, so identical draws give exactly zero variance.
    double mean = 0.0;
    double ss = 0.0;
    for (std::size_t r = 0; r < options.repeats; ++r) {
      const double d = sampler(x, r);
      const double delta = d - mean;
      mean += delta / static_cast<double>(r + 1);
      ss += delta * (d - mean);
    }
    acc[b].var_sum += ss / static_cast<double>(options.repeats - 1);
    acc[b].mean_sum += mean;
    if (options.reference_sigma) {
      const double s = options.reference_sigma(x);
      acc[b].ref_sq += s * s;
    }
    ++acc[b].count;
  }

  std::vector<CalibrationBin> out(options.bins);
  for (std::size_t b = 0; b < options.bins; ++b) {
    auto& bin = out[b];
    bin.lo = lo + width * static_cast<double>(b);
    bin.hi = b + 1 == options.bins ? hi : lo + width * static_cast<double>(b + 1);
    bin.count = acc[b].count;
    if (bin.count == 0) continue;
    const double c = static_cast<double>(bin.count);
    bin.mean_prediction = acc[b].mean_sum / c;
    bin.predicted_std = std::sqrt(acc[b].var_sum / c);
    if (options.reference_sigma) bin.reference_std = std::sqrt(acc[b].ref_sq / c);
  }
  return out;
}

void write_calibration_csv(std::ostream& out, std::span<const CalibrationBin> bins) {
  out << "bin_lo,bin_hi,count,mean_prediction,predicted_std,reference_std\n";
  for (const auto& b : bins) {
    out << fmt::format("{:.17g},{:.17g},{},{:.17g},{:.17g},", b.lo, b.hi, b.count, b.mean_prediction,
                       b.predicted_std);
    if (b.reference_std) out << fmt::format("{:.17g}", *b.reference_std);
    out << '\n';
  }
}

}  // namespace lift::eval
