#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lift/data.hpp"

namespace lift::perturb {

/// `round(fraction * n)` distinct row indices (halves rounded up), sorted.
std::vector<std::size_t> select_rows(std::size_t n, double fraction, std::uint64_t seed);

/// Each selected label is replaced by a uniform draw over the other labels.
TabularDataset corrupt_labels_random(const TabularDataset& ds, double fraction, std::uint64_t seed);

/// Each selected label moves to its successor in label_set order (cyclic).
TabularDataset corrupt_labels_systematic(const TabularDataset& ds, double fraction, std::uint64_t seed);

/// Shift every label at `indices` by `steps` positions in label_set order.
/// Negative steps undo a systematic corruption.
TabularDataset shift_labels(const TabularDataset& ds, const std::vector<std::size_t>& indices, long steps);

/// Targets at the selected rows are replaced by values 3 to 6 sample
/// standard deviations from the mean, outside the observed [min, max].
TabularDataset inject_outliers(const TabularDataset& ds, double fraction, std::uint64_t seed);

enum class NoiseKind { gaussian_linf, signed_constant };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian_linf;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The per-row perturbations perturb_features would add.
FeatureMatrix sample_noise(std::size_t n, std::size_t p, const NoiseSpec& spec);

FeatureMatrix perturb_features(const FeatureMatrix& x, const NoiseSpec& spec);
TabularDataset perturb_features(const TabularDataset& ds, const NoiseSpec& spec);

/// Originals followed by `copies` noisy duplicates of every row, clamped
/// after noising when `clamp` is set.
TabularDataset augment_gaussian(const TabularDataset& ds, double epsilon, std::size_t copies,
                                std::optional<std::pair<double, double>> clamp, std::uint64_t seed);

/// Appends sqrt(lambda) * I with zero targets.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> ridge_augment(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                          double lambda);

/// Ordinary least squares via column-pivoted QR.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace lift::perturb
